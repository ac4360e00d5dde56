//! Party actors and the in-memory message bus. Actors exchange encoded
//! wire bytes through per-edge FIFO queues; the bus counts every byte
//! and keeps a capture of the party-to-watchtower boundary so tests can
//! prove no balance or nonce material ever crosses it.

use crate::chain::{SimChain, Tx};
use crate::contracts::{Call, Contract};
use crate::crypto::{Digest, KeyPair, PublicKey};
use crate::protocol::{PartyLedger, ProtocolError, SignedState};
use crate::types::{ChannelState, Cid, Party};
use crate::wire::{PaymentMessage, WatchtowerReceipt, PAYMENT_MSG_LEN, RECEIPT_LEN, SUBMISSION_LEN};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    PartyA,
    PartyB,
    Watchtower,
}

impl Endpoint {
    pub fn of(party: Party) -> Endpoint {
        match party {
            Party::A => Endpoint::PartyA,
            Party::B => Endpoint::PartyB,
        }
    }
}

/// Per-class wire statistics; `sizes` collects the distinct encoded
/// lengths observed on the class.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EdgeStats {
    pub messages: u64,
    pub bytes: u64,
    pub sizes: BTreeSet<usize>,
}

impl EdgeStats {
    fn record(&mut self, len: usize) {
        self.messages += 1;
        self.bytes += len as u64;
        self.sizes.insert(len);
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WireStats {
    pub party_to_party: EdgeStats,
    pub party_to_wt: EdgeStats,
    pub wt_to_party: EdgeStats,
}

/// Ordered, reliable duplex queues between the three endpoints. Queues
/// preserve per-pair FIFO; delivery waits until the receiver is online.
#[derive(Debug, Default)]
pub struct MessageBus {
    queues: std::collections::BTreeMap<(Endpoint, Endpoint), VecDeque<Vec<u8>>>,
    pub stats: WireStats,
    /// Every byte string sent from a party to the watchtower, for the
    /// privacy boundary check.
    pub party_to_wt_capture: Vec<Vec<u8>>,
}

impl MessageBus {
    pub fn send(&mut self, from: Endpoint, to: Endpoint, bytes: Vec<u8>) {
        let class = match (from, to) {
            (Endpoint::Watchtower, _) => &mut self.stats.wt_to_party,
            (_, Endpoint::Watchtower) => &mut self.stats.party_to_wt,
            _ => &mut self.stats.party_to_party,
        };
        class.record(bytes.len());
        if to == Endpoint::Watchtower {
            self.party_to_wt_capture.push(bytes.clone());
        }
        self.queues.entry((from, to)).or_default().push_back(bytes);
    }

    pub fn recv(&mut self, from: Endpoint, to: Endpoint) -> Option<Vec<u8>> {
        self.queues.get_mut(&(from, to)).and_then(VecDeque::pop_front)
    }

    pub fn inbox_empty(&self, to: Endpoint) -> bool {
        self.queues
            .iter()
            .all(|(&(_, t), q)| t != to || q.is_empty())
    }

    pub fn all_empty(&self) -> bool {
        self.queues.values().all(VecDeque::is_empty)
    }

    /// Sources with at least one message queued for `to`, in fixed order.
    pub fn pending_sources(&self, to: Endpoint) -> Vec<Endpoint> {
        self.queues
            .iter()
            .filter(|(&(_, t), q)| t == to && !q.is_empty())
            .map(|(&(f, _), _)| f)
            .collect()
    }
}

/// Does any of `windows` (inclusive) cover `now`?
pub fn in_windows(windows: &[(u64, u64)], now: u64) -> bool {
    windows.iter().any(|&(from, until)| now >= from && now <= until)
}

/// Outbound messages produced while handling one inbox message.
pub struct Outbound {
    pub to_peer: Option<Vec<u8>>,
    pub to_wt: Option<Vec<u8>>,
    pub note: Option<String>,
}

/// Outcome of asking an actor to begin a scripted payment.
pub enum PaymentStart {
    Started(Vec<u8>),
    /// An earlier exchange is still in flight; retry next round.
    Busy,
    /// The step can never run (closure observed, or the script was
    /// voided by one); skip it.
    Refused(&'static str),
}

/// A channel party in watchtower mode: drives the payment exchange,
/// watches the chain for closures against it, and submits dispute,
/// payout, and challenge transactions when entitled.
pub struct PartyActor {
    pub role: Party,
    pub kp: KeyPair,
    pub peer_pk: PublicKey,
    pub wt_pk: PublicKey,
    pub channel: Cid,
    pub ledger: PartyLedger,
    /// Only the tower customer can claim watchtower penalties.
    pub is_customer: bool,
    pub offline: Vec<(u64, u64)>,
    pub rng: ChaCha20Rng,
    /// Adversary-controlled parties take no protective actions.
    pub passive: bool,
    /// Set once this party observes a closure of its channel; honest
    /// parties then stop signing newer states, mirroring the
    /// watchtower's freeze rule.
    closing_seen: bool,
    tx_seq: u64,
    scanned_to: u64,
    disputed_idx: Option<u128>,
    payout_tx: Option<Digest>,
    challenge_done: bool,
}

impl PartyActor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        role: Party,
        kp: KeyPair,
        peer_pk: PublicKey,
        wt_pk: PublicKey,
        channel: Cid,
        ledger: PartyLedger,
        is_customer: bool,
        offline: Vec<(u64, u64)>,
        rng: ChaCha20Rng,
    ) -> PartyActor {
        PartyActor {
            role,
            kp,
            peer_pk,
            wt_pk,
            channel,
            ledger,
            is_customer,
            offline,
            rng,
            passive: false,
            closing_seen: false,
            tx_seq: 0,
            scanned_to: 0,
            disputed_idx: None,
            payout_tx: None,
            challenge_done: false,
        }
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint::of(self.role)
    }

    pub fn is_online(&self, now: u64) -> bool {
        !in_windows(&self.offline, now)
    }

    /// Check the event log for a closure of our channel; call whenever
    /// the party is online, before it processes protocol messages.
    pub fn observe_closing(&mut self, chain: &SimChain) {
        if !self.is_online(chain.now()) || self.closing_seen {
            return;
        }
        if chain.events().iter().any(|e| e.cid == self.channel) {
            self.closing_seen = true;
        }
    }

    pub fn next_tx(&mut self, target: Cid, value: u128, call: Call) -> Tx {
        let tx = Tx::signed(&self.kp, self.tx_seq, target, value, call);
        self.tx_seq += 1;
        tx
    }

    pub fn closing_seen(&self) -> bool {
        self.closing_seen
    }

    /// Begin a scripted payment to the peer.
    pub fn start_payment(&mut self, amount: u128) -> PaymentStart {
        if self.closing_seen {
            return PaymentStart::Refused("channel closing");
        }
        match self.ledger.propose_payment(&self.kp, amount as i128, &mut self.rng) {
            Ok(msg) => PaymentStart::Started(msg.encode().to_vec()),
            Err(ProtocolError::ProposalInFlight) => PaymentStart::Busy,
            // An earlier script step was voided by a closure the sender
            // has not observed yet; the rest of the script is moot.
            Err(ProtocolError::Overdraft) => PaymentStart::Refused("insufficient balance"),
            Err(err) => panic!("scripted payment must be valid: {err}"),
        }
    }

    /// Handle one inbound wire message (payment reply/proposal or
    /// watchtower receipt), producing any messages to send onward.
    pub fn handle_message(&mut self, bytes: &[u8]) -> Outbound {
        let mut out = Outbound { to_peer: None, to_wt: None, note: None };
        match bytes.len() {
            PAYMENT_MSG_LEN => {
                let Ok(msg) = PaymentMessage::decode(bytes) else {
                    out.note = Some(format!("{}: undecodable payment message", self.role));
                    return out;
                };
                // First try to complete our own pending proposal; if that
                // does not match, treat it as a fresh proposal to accept.
                if self.ledger.finalize_proposal(&self.peer_pk, &msg).is_ok() {
                    out.note = Some(format!(
                        "{}: payment finalized at state {}",
                        self.role,
                        self.ledger.state()
                    ));
                    return out;
                }
                // No new states once the channel is closing on-chain.
                if self.closing_seen {
                    out.note = Some(format!("{}: rejected proposal, channel closing", self.role));
                    return out;
                }
                // Honest acceptor policy: never sign away own balance.
                let my_new = match self.role {
                    Party::A => msg.state.bal_a,
                    Party::B => msg.state.bal_b,
                };
                if my_new < self.ledger.my_balance() {
                    out.note = Some(format!("{}: rejected adverse proposal", self.role));
                    return out;
                }
                match self.ledger.accept_payment(&self.kp, &self.peer_pk, &msg) {
                    Ok((reply, submission)) => {
                        out.to_peer = Some(reply.encode().to_vec());
                        out.to_wt = Some(submission.encode().to_vec());
                        out.note = Some(format!(
                            "{}: accepted payment, state {}",
                            self.role,
                            self.ledger.state()
                        ));
                    }
                    Err(err) => {
                        out.note = Some(format!("{}: rejected proposal ({err})", self.role));
                    }
                }
            }
            RECEIPT_LEN => match WatchtowerReceipt::decode(bytes) {
                Ok(receipt) => {
                    if self.ledger.store_receipt(&self.wt_pk, &receipt).is_ok() {
                        out.note =
                            Some(format!("{}: stored receipt idx {}", self.role, receipt.idx));
                    } else {
                        out.note = Some(format!("{}: discarded mismatched receipt", self.role));
                    }
                }
                Err(err) => out.note = Some(format!("{}: bad receipt ({err})", self.role)),
            },
            other => {
                out.note = Some(format!("{}: unexpected {other}-byte message", self.role));
            }
        }
        out
    }

    /// Build a close transaction for a scripted closure. When the
    /// requested historic state never completed (a payment stalled), the
    /// newest co-signed state at or below it is used instead.
    pub fn close_tx(&mut self, with_idx: Option<u128>) -> Tx {
        let signed: SignedState = match with_idx {
            None => self.ledger.current_signed(),
            Some(idx) => self.ledger.signed_state_at(idx).unwrap_or_else(|| {
                self.ledger
                    .history()
                    .iter().rfind(|e| e.state.idx <= idx)
                    .copied()
                    .expect("history holds at least the initial state")
            }),
        };
        self.next_tx(
            self.channel,
            0,
            Call::ChannelClose {
                state: signed.state,
                r: signed.r,
                sig_a: signed.sig_a,
                sig_b: signed.sig_b,
            },
        )
    }

    fn channel_view<'c>(&self, chain: &'c SimChain) -> Option<&'c crate::contracts::ChannelContract> {
        match chain.contract(&self.channel) {
            Some(Contract::Channel(c)) => Some(c),
            _ => None,
        }
    }

    /// Protective duties while online: dispute stale closures, drive the
    /// fail-safe payout after `end`, and challenge a failed watchtower.
    /// Returns transactions to submit this round.
    pub fn protect(&mut self, chain: &SimChain) -> (Vec<Tx>, Vec<String>) {
        let mut txs = Vec::new();
        let mut notes = Vec::new();
        let now = chain.now();
        if self.passive || !self.is_online(now) {
            return (txs, notes);
        }

        // Watch the event log for closures of our channel.
        let mut observed_stale: Option<ChannelState> = None;
        for event in chain.events().iter().filter(|e| e.height >= self.scanned_to) {
            if event.cid == self.channel && event.state.idx < self.ledger.state().idx {
                observed_stale = Some(event.state);
            }
        }
        self.scanned_to = now + 1;

        let Some(contract) = self.channel_view(chain) else {
            return (txs, notes);
        };
        let latest = self.ledger.current_signed();

        if let Some(stale) = observed_stale {
            let fresh_needed = contract.flag == crate::contracts::channel::Flag::Dispute
                && contract.accepted.is_some_and(|s| s.idx < latest.state.idx)
                && now < contract.end
                && self.disputed_idx != Some(latest.state.idx);
            if fresh_needed {
                txs.push(self.next_tx(
                    self.channel,
                    0,
                    Call::ChannelDispute {
                        state: latest.state,
                        r: latest.r,
                        sig_a: latest.sig_a,
                        sig_b: latest.sig_b,
                    },
                ));
                self.disputed_idx = Some(latest.state.idx);
                notes.push(format!(
                    "{}: disputing stale closure {} with {}",
                    self.role, stale, latest.state
                ));
            }
        }

        // Fail-safe payout: after `end`, either party may release the
        // accepted state without the watchtower.
        if contract.flag == crate::contracts::channel::Flag::Dispute && now >= contract.end {
            let resolved_reverted = self.payout_tx.is_none_or(|id| {
                chain
                    .receipts()
                    .iter()
                    .rev()
                    .find(|r| r.tx_id == id)
                    .is_some_and(|r| !r.status.is_ok())
            });
            if resolved_reverted {
                if let Some(accepted) = contract.accepted {
                    let tx = self.next_tx(
                        self.channel,
                        0,
                        Call::ChannelPayout { state: accepted, is_pay: true },
                    );
                    self.payout_tx = Some(tx.id());
                    notes.push(format!("{}: requesting fail-safe payout of {}", self.role, accepted));
                    txs.push(tx);
                }
            }
        }

        // Challenge: only after finalization, only by the customer, and
        // only when the contract state shows an actual entitlement.
        if self.is_customer && !self.challenge_done {
            if let (crate::contracts::channel::Flag::Idle, Some(accepted)) =
                (contract.flag, contract.accepted)
            {
                if now > contract.end {
                    if let Some(receipt) = self.ledger.latest_receipt().copied() {
                        let entitled = receipt.idx > accepted.idx
                            || !contract.is_rspd
                            || !contract.perc.is_zero();
                        if entitled {
                            if let Some(signed) = self.ledger.signed_state_at(receipt.idx) {
                                txs.push(self.next_tx(
                                    self.channel,
                                    0,
                                    Call::ChannelChallenge {
                                        state: signed.state,
                                        r: signed.r,
                                        sig_wt: receipt.sig_wt,
                                    },
                                ));
                                self.challenge_done = true;
                                notes.push(format!(
                                    "{}: challenging watchtower with receipt idx {}",
                                    self.role, receipt.idx
                                ));
                            }
                        }
                    }
                }
            }
        }

        (txs, notes)
    }

    /// Whether this actor may still produce a challenge, for the
    /// runner's termination probe.
    pub fn challenge_pending(&self, chain: &SimChain) -> bool {
        if !self.is_customer || self.challenge_done || self.passive {
            return false;
        }
        let Some(contract) = self.channel_view(chain) else {
            return false;
        };
        let (crate::contracts::channel::Flag::Idle, Some(accepted)) =
            (contract.flag, contract.accepted)
        else {
            return false;
        };
        let Some(receipt) = self.ledger.latest_receipt() else {
            return false;
        };
        receipt.idx > accepted.idx || !contract.is_rspd || !contract.perc.is_zero()
    }
}

/// Sanity helper for the privacy boundary: true when `needle` occurs as
/// a contiguous byte substring of `haystack`.
pub fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Submission length sanity check for trace assertions.
pub fn is_submission_len(len: usize) -> bool {
    len == SUBMISSION_LEN
}

/// A channel party in short-lived assertion mode: exchanges block-hash
/// anchored states and handles the fast/slow closure paths itself.
pub struct AssertionPartyActor {
    pub role: Party,
    pub kp: KeyPair,
    pub peer_pk: PublicKey,
    pub channel: Cid,
    pub capacity: u128,
    /// Latest fully co-signed assertion.
    pub current: AssertionMessage,
    pub history: Vec<AssertionMessage>,
    pub offline: Vec<(u64, u64)>,
    pub passive: bool,
    pub rng: ChaCha20Rng,
    closing_seen: bool,
    pending: Option<AssertionMessage>,
    tx_seq: u64,
    scanned_to: u64,
    disputed_idx: Option<u128>,
    payout_tx: Option<Digest>,
}

use crate::assertions::{check_assertion_proposal, counter_sign_assertion, sign_assertion};
use crate::contracts::assertion::AssertFlag;
use crate::wire::{AssertionMessage, ASSERTION_MSG_LEN};

impl AssertionPartyActor {
    pub fn new(
        role: Party,
        kp: KeyPair,
        peer_pk: PublicKey,
        channel: Cid,
        initial: AssertionMessage,
        offline: Vec<(u64, u64)>,
        rng: ChaCha20Rng,
    ) -> AssertionPartyActor {
        AssertionPartyActor {
            role,
            kp,
            peer_pk,
            channel,
            capacity: initial.state.total(),
            current: initial,
            history: vec![initial],
            offline,
            passive: false,
            rng,
            closing_seen: false,
            pending: None,
            tx_seq: 0,
            scanned_to: 0,
            disputed_idx: None,
            payout_tx: None,
        }
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint::of(self.role)
    }

    pub fn is_online(&self, now: u64) -> bool {
        !in_windows(&self.offline, now)
    }

    pub fn observe_closing(&mut self, chain: &SimChain) {
        if !self.is_online(chain.now()) || self.closing_seen {
            return;
        }
        if chain.events().iter().any(|e| e.cid == self.channel) {
            self.closing_seen = true;
        }
    }

    fn next_tx(&mut self, call: Call) -> Tx {
        let tx = Tx::signed(&self.kp, self.tx_seq, self.channel, 0, call);
        self.tx_seq += 1;
        tx
    }

    /// Skip one sequence number (consumed by an out-of-band setup call).
    pub fn next_seq_bump(&mut self) -> u64 {
        let seq = self.tx_seq;
        self.tx_seq += 1;
        seq
    }

    fn my_balance(&self, state: &ChannelState) -> u128 {
        match self.role {
            Party::A => state.bal_a,
            Party::B => state.bal_b,
        }
    }

    /// Propose a payment anchored at the current chain tip; parties
    /// exchanging across a block boundary re-anchor automatically
    /// because each proposal picks up the fresh tip.
    pub fn start_payment(&mut self, amount: u128, chain: &SimChain) -> PaymentStart {
        if self.closing_seen {
            return PaymentStart::Refused("channel closing");
        }
        if self.pending.is_some() {
            return PaymentStart::Busy;
        }
        let state = self.current.state;
        let (own, peer) = match self.role {
            Party::A => (state.bal_a, state.bal_b),
            Party::B => (state.bal_b, state.bal_a),
        };
        if own < amount {
            return PaymentStart::Refused("insufficient balance");
        }
        let new_state = match self.role {
            Party::A => ChannelState::new(own - amount, peer + amount, state.idx + 1),
            Party::B => ChannelState::new(peer + amount, own - amount, state.idx + 1),
        };
        let anchor = *chain.block_hashes().last().expect("genesis present");
        let proposal = sign_assertion(&self.kp, self.role, self.channel, new_state, anchor);
        self.pending = Some(proposal);
        PaymentStart::Started(proposal.encode().to_vec())
    }

    pub fn handle_message(&mut self, bytes: &[u8], chain: &SimChain) -> Outbound {
        let mut out = Outbound { to_peer: None, to_wt: None, note: None };
        if bytes.len() != ASSERTION_MSG_LEN {
            out.note = Some(format!("{}: unexpected {}-byte message", self.role, bytes.len()));
            return out;
        }
        let Ok(msg) = AssertionMessage::decode(bytes) else {
            out.note = Some(format!("{}: undecodable assertion", self.role));
            return out;
        };
        if let Some(pending) = self.pending {
            if msg.state == pending.state && msg.anchor == pending.anchor {
                // Counter-signed copy of our own proposal.
                let payload = msg.sign_payload();
                let peer_sig = match self.role {
                    Party::A => &msg.sig_b,
                    Party::B => &msg.sig_a,
                };
                if crate::crypto::verify(&self.peer_pk, &payload, peer_sig) {
                    self.current = msg;
                    self.history.push(msg);
                    self.pending = None;
                    out.note = Some(format!("{}: assertion completed at {}", self.role, msg.state));
                } else {
                    out.note = Some(format!("{}: bad counter-signature", self.role));
                }
                return out;
            }
        }
        // A fresh proposal from the peer.
        if self.closing_seen {
            out.note = Some(format!("{}: rejected assertion, channel closing", self.role));
            return out;
        }
        if self.my_balance(&msg.state) < self.my_balance(&self.current.state) {
            out.note = Some(format!("{}: rejected adverse assertion", self.role));
            return out;
        }
        match check_assertion_proposal(
            &msg,
            &self.peer_pk,
            self.role.other(),
            self.channel,
            &self.current.state,
            self.capacity,
            chain.block_hashes(),
        ) {
            Ok(()) => {
                let completed = counter_sign_assertion(&self.kp, self.role, &msg);
                self.current = completed;
                self.history.push(completed);
                out.to_peer = Some(completed.encode().to_vec());
                out.note = Some(format!("{}: counter-signed assertion {}", self.role, msg.state));
            }
            Err(err) => {
                out.note = Some(format!("{}: rejected assertion ({err:?})", self.role));
            }
        }
        out
    }

    pub fn close_tx(&mut self, with_idx: Option<u128>) -> Tx {
        let assertion = match with_idx {
            None => self.current,
            Some(idx) => *self
                .history
                .iter()
                .find(|m| m.state.idx == idx)
                .expect("close references a known assertion"),
        };
        self.next_tx(Call::AssertClose { assertion })
    }

    fn channel_view<'c>(&self, chain: &'c SimChain) -> Option<&'c crate::contracts::AssertionChannel> {
        match chain.contract(&self.channel) {
            Some(Contract::Assertion(c)) => Some(c),
            _ => None,
        }
    }

    pub fn protect(&mut self, chain: &SimChain) -> (Vec<Tx>, Vec<String>) {
        let mut txs = Vec::new();
        let mut notes = Vec::new();
        let now = chain.now();
        if self.passive || !self.is_online(now) {
            return (txs, notes);
        }
        let mut saw_stale = false;
        for event in chain.events().iter().filter(|e| e.height >= self.scanned_to) {
            if event.cid == self.channel && event.state.idx < self.current.state.idx {
                saw_stale = true;
            }
        }
        self.scanned_to = now + 1;
        let Some(contract) = self.channel_view(chain) else {
            return (txs, notes);
        };
        if let AssertFlag::Closing { deadline, .. } = contract.flag {
            let accepted_idx = contract.accepted.map_or(0, |s| s.idx);
            if saw_stale
                && accepted_idx < self.current.state.idx
                && now < deadline
                && self.disputed_idx != Some(self.current.state.idx)
            {
                txs.push(self.next_tx(Call::AssertDispute { assertion: self.current }));
                self.disputed_idx = Some(self.current.state.idx);
                notes.push(format!(
                    "{}: disputing with assertion {}",
                    self.role, self.current.state
                ));
            }
            // Payout executes once `now` reaches the deadline; submit one
            // block ahead so the transaction lands exactly on time.
            if now + 1 >= deadline {
                let resolved_reverted = self.payout_tx.is_none_or(|id| {
                    chain
                        .receipts()
                        .iter()
                        .rev()
                        .find(|r| r.tx_id == id)
                        .is_some_and(|r| !r.status.is_ok())
                });
                if resolved_reverted {
                    let tx = self.next_tx(Call::AssertPayout);
                    self.payout_tx = Some(tx.id());
                    notes.push(format!("{}: requesting assertion payout", self.role));
                    txs.push(tx);
                }
            }
        }
        (txs, notes)
    }
}
