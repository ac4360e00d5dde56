//! The interactive off-chain payment exchange between the two channel
//! parties, and each party's local bookkeeping.
//!
//! One payment is: the sender proposes a new state (fresh nonce,
//! incremented index, own signature); the receiver verifies, counter-
//! signs, advances, and forwards the blinded submission to the
//! watchtower; the sender advances on the counter-signature; the
//! watchtower records the commitment and sends both parties a receipt.

use crate::crypto::{verify, KeyPair, PublicKey, Signature};
use crate::types::{hash_commit, ChannelState, Cid, Nonce, Party};
use crate::wire::{payment_sign_payload, receipt_sign_payload, PaymentMessage, WatchtowerReceipt, WatchtowerSubmission};
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("message addresses a different channel")]
    WrongChannel,
    #[error("proposal index is not ledger index + 1")]
    NonMonotonicIndex,
    #[error("balances do not conserve channel capacity")]
    CapacityViolation,
    #[error("signature verification failed")]
    BadSignature,
    #[error("resulting balance would be negative")]
    Overdraft,
    #[error("a proposal is already awaiting a counter-signature")]
    ProposalInFlight,
    #[error("no proposal awaiting a counter-signature")]
    NoPendingProposal,
    #[error("counter-signature does not match the pending proposal")]
    ProposalMismatch,
    #[error("receipt does not match any recorded state")]
    ReceiptMismatch,
}

/// A fully co-signed state a party can take on-chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedState {
    pub state: ChannelState,
    pub r: Nonce,
    pub sig_a: Signature,
    pub sig_b: Signature,
}

#[derive(Clone, Debug)]
struct PendingProposal {
    state: ChannelState,
    r: Nonce,
    own_sig: Signature,
}

/// One party's local view of a channel: the current co-signed state,
/// the latest watchtower receipt, and the full signed history.
#[derive(Clone, Debug)]
pub struct PartyLedger {
    pub cid: Cid,
    pub role: Party,
    pub capacity: u128,
    state: ChannelState,
    r: Nonce,
    own_sig: Signature,
    peer_sig: Signature,
    latest_receipt: Option<WatchtowerReceipt>,
    history: Vec<SignedState>,
    pending: Option<PendingProposal>,
}

impl PartyLedger {
    /// Open a ledger at the initial state. Both signatures over the
    /// initial state come from the setup exchange.
    pub fn open(
        cid: Cid,
        role: Party,
        state: ChannelState,
        r: Nonce,
        own_sig: Signature,
        peer_sig: Signature,
    ) -> PartyLedger {
        let entry = SignedState {
            state,
            r,
            sig_a: match role {
                Party::A => own_sig,
                Party::B => peer_sig,
            },
            sig_b: match role {
                Party::A => peer_sig,
                Party::B => own_sig,
            },
        };
        PartyLedger {
            cid,
            role,
            capacity: state.total(),
            state,
            r,
            own_sig,
            peer_sig,
            latest_receipt: None,
            history: vec![entry],
            pending: None,
        }
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    pub fn nonce(&self) -> Nonce {
        self.r
    }

    pub fn latest_receipt(&self) -> Option<&WatchtowerReceipt> {
        self.latest_receipt.as_ref()
    }

    pub fn history(&self) -> &[SignedState] {
        &self.history
    }

    /// The current state with both signatures, ready for close/dispute.
    pub fn current_signed(&self) -> SignedState {
        *self.history.last().expect("history never empty")
    }

    pub fn my_balance(&self) -> u128 {
        match self.role {
            Party::A => self.state.bal_a,
            Party::B => self.state.bal_b,
        }
    }

    fn apply_delta(&self, delta: i128) -> Result<ChannelState, ProtocolError> {
        let (own, peer) = match self.role {
            Party::A => (self.state.bal_a, self.state.bal_b),
            Party::B => (self.state.bal_b, self.state.bal_a),
        };
        let own_new = own as i128 - delta;
        let peer_new = peer as i128 + delta;
        if own_new < 0 || peer_new < 0 {
            return Err(ProtocolError::Overdraft);
        }
        let (own_new, peer_new) = (own_new as u128, peer_new as u128);
        Ok(match self.role {
            Party::A => ChannelState::new(own_new, peer_new, self.state.idx + 1),
            Party::B => ChannelState::new(peer_new, own_new, self.state.idx + 1),
        })
    }

    /// Start a payment of `delta` tokens to the counter-party (negative
    /// requests tokens). The ledger does not advance until the
    /// counter-signature arrives.
    pub fn propose_payment(
        &mut self,
        kp: &KeyPair,
        delta: i128,
        rng: &mut impl RngCore,
    ) -> Result<PaymentMessage, ProtocolError> {
        if self.pending.is_some() {
            return Err(ProtocolError::ProposalInFlight);
        }
        let state = self.apply_delta(delta)?;
        let r = Nonce::random(rng);
        let payload = payment_sign_payload(&self.cid, state.idx, &hash_commit(&state, &r));
        let own_sig = kp.sign(&payload);
        self.pending = Some(PendingProposal { state, r, own_sig });
        Ok(PaymentMessage { cid: self.cid, state, r, sig: own_sig })
    }

    /// Receiver side: validate a proposal, counter-sign, advance, and
    /// produce both the reply and the watchtower submission to forward.
    pub fn accept_payment(
        &mut self,
        kp: &KeyPair,
        peer_pk: &PublicKey,
        msg: &PaymentMessage,
    ) -> Result<(PaymentMessage, WatchtowerSubmission), ProtocolError> {
        if msg.cid != self.cid {
            return Err(ProtocolError::WrongChannel);
        }
        if msg.state.idx != self.state.idx + 1 {
            return Err(ProtocolError::NonMonotonicIndex);
        }
        if msg.state.total() != self.capacity {
            return Err(ProtocolError::CapacityViolation);
        }
        let h = hash_commit(&msg.state, &msg.r);
        let payload = payment_sign_payload(&self.cid, msg.state.idx, &h);
        if !verify(peer_pk, &payload, &msg.sig) {
            return Err(ProtocolError::BadSignature);
        }
        let own_sig = kp.sign(&payload);
        self.advance(msg.state, msg.r, own_sig, msg.sig);
        let (sig_a, sig_b) = match self.role {
            Party::A => (own_sig, msg.sig),
            Party::B => (msg.sig, own_sig),
        };
        let reply = PaymentMessage { cid: self.cid, state: msg.state, r: msg.r, sig: own_sig };
        let submission = WatchtowerSubmission { cid: self.cid, h_s: h, idx: msg.state.idx, sig_a, sig_b };
        Ok((reply, submission))
    }

    /// Sender side: commit the pending proposal once the counter-party's
    /// signature arrives. Re-delivery after commit is rejected, so a
    /// proposal advances the ledger at most once.
    pub fn finalize_proposal(
        &mut self,
        peer_pk: &PublicKey,
        msg: &PaymentMessage,
    ) -> Result<(), ProtocolError> {
        if msg.cid != self.cid {
            return Err(ProtocolError::WrongChannel);
        }
        let pending = self.pending.as_ref().ok_or(ProtocolError::NoPendingProposal)?;
        if msg.state != pending.state || msg.r != pending.r {
            return Err(ProtocolError::ProposalMismatch);
        }
        let payload =
            payment_sign_payload(&self.cid, msg.state.idx, &hash_commit(&msg.state, &msg.r));
        if !verify(peer_pk, &payload, &msg.sig) {
            return Err(ProtocolError::BadSignature);
        }
        let own_sig = pending.own_sig;
        self.advance(msg.state, msg.r, own_sig, msg.sig);
        self.pending = None;
        Ok(())
    }

    fn advance(&mut self, state: ChannelState, r: Nonce, own_sig: Signature, peer_sig: Signature) {
        self.state = state;
        self.r = r;
        self.own_sig = own_sig;
        self.peer_sig = peer_sig;
        let (sig_a, sig_b) = match self.role {
            Party::A => (own_sig, peer_sig),
            Party::B => (peer_sig, own_sig),
        };
        self.history.push(SignedState { state, r, sig_a, sig_b });
    }

    /// Record a watchtower receipt after checking it signs a commitment
    /// we actually hold.
    pub fn store_receipt(
        &mut self,
        wt_pk: &PublicKey,
        receipt: &WatchtowerReceipt,
    ) -> Result<(), ProtocolError> {
        if receipt.cid != self.cid {
            return Err(ProtocolError::WrongChannel);
        }
        let known = self
            .history
            .iter()
            .find(|e| e.state.idx == receipt.idx)
            .ok_or(ProtocolError::ReceiptMismatch)?;
        if hash_commit(&known.state, &known.r) != receipt.h_s {
            return Err(ProtocolError::ReceiptMismatch);
        }
        let payload = receipt_sign_payload(&self.cid, receipt.idx, &receipt.h_s);
        if !verify(wt_pk, &payload, &receipt.sig_wt) {
            return Err(ProtocolError::BadSignature);
        }
        if self.latest_receipt.is_none_or(|r| receipt.idx > r.idx) {
            self.latest_receipt = Some(*receipt);
        }
        Ok(())
    }

    /// A signed state by its index, for disputes with historic states.
    pub fn signed_state_at(&self, idx: u128) -> Option<SignedState> {
        self.history.iter().find(|e| e.state.idx == idx).copied()
    }
}

/// Build both initial signatures for the setup exchange: each party
/// signs the initial state before funds are locked on-chain.
pub fn initial_signatures(
    kp_a: &KeyPair,
    kp_b: &KeyPair,
    cid: &Cid,
    state: &ChannelState,
    r: &Nonce,
) -> (Signature, Signature) {
    let payload = payment_sign_payload(cid, state.idx, &hash_commit(state, r));
    (kp_a.sign(&payload), kp_b.sign(&payload))
}
