//! Short-lived assertions: channel states co-signed together with a
//! recent block hash, so the contract itself can tell fresh closures
//! from stale ones and skip the watchtower entirely.
//!
//! Party-side helpers live here; the contract half is
//! [`crate::contracts::AssertionChannel`].

use crate::crypto::{verify, Digest, KeyPair, PublicKey};
use crate::types::{ChannelState, Cid, Party};
use crate::wire::AssertionMessage;
use serde::{Deserialize, Serialize};

/// How a submitted assertion relates to the chain's recent history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Freshness {
    Fresh,
    Stale,
}

/// Contract parameters for the assertion-based closure paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreshnessPolicy {
    /// Freshness limit `n`: how many recent block hashes count as fresh.
    pub freshness_limit: u64,
    /// Fast-path payout delay for fresh closures.
    pub t_fast: u64,
    /// Slow-path timeout for stale closures.
    pub fail_safe: u64,
}

impl Default for FreshnessPolicy {
    fn default() -> FreshnessPolicy {
        FreshnessPolicy {
            freshness_limit: 4,
            t_fast: 2,
            fail_safe: 5760,
        }
    }
}

/// Is `anchor` one of the `n` most recent hashes in this chain view?
/// `chain_hashes` is ordered oldest to newest.
pub fn freshness(chain_hashes: &[Digest], anchor: &Digest, n: u64) -> Freshness {
    if chain_hashes.iter().rev().take(n as usize).any(|h| h == anchor) {
        Freshness::Fresh
    } else {
        Freshness::Stale
    }
}

/// Build a half-signed assertion for a proposed state, anchored at the
/// signer's current chain tip.
pub fn sign_assertion(
    kp: &KeyPair,
    role: Party,
    cid: Cid,
    state: ChannelState,
    anchor: Digest,
) -> AssertionMessage {
    let mut msg = AssertionMessage {
        cid,
        state,
        anchor,
        sig_a: crate::crypto::Signature::PLACEHOLDER,
        sig_b: crate::crypto::Signature::PLACEHOLDER,
    };
    let sig = kp.sign(&msg.sign_payload());
    match role {
        Party::A => msg.sig_a = sig,
        Party::B => msg.sig_b = sig,
    }
    msg
}

/// Fill in the counter-party's signature slot.
pub fn counter_sign_assertion(kp: &KeyPair, role: Party, msg: &AssertionMessage) -> AssertionMessage {
    let mut out = *msg;
    let sig = kp.sign(&msg.sign_payload());
    match role {
        Party::A => out.sig_a = sig,
        Party::B => out.sig_b = sig,
    }
    out
}

/// Check both signatures of a completed assertion.
pub fn assertion_fully_signed(msg: &AssertionMessage, pk_a: &PublicKey, pk_b: &PublicKey) -> bool {
    let payload = msg.sign_payload();
    verify(pk_a, &payload, &msg.sig_a) && verify(pk_b, &payload, &msg.sig_b)
}

/// Reasons an honest peer refuses to counter-sign a proposed assertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssertionRejection {
    /// Anchor is not a block hash on our view of the chain; signing it
    /// would commit us to a divergent fork.
    UnknownAnchor,
    NonMonotonicIndex,
    CapacityViolation,
    BadSignature,
    WrongChannel,
}

/// Validate a proposed assertion against the acceptor's local state
/// before counter-signing.
pub fn check_assertion_proposal(
    msg: &AssertionMessage,
    proposer_pk: &PublicKey,
    proposer_role: Party,
    cid: Cid,
    current: &ChannelState,
    capacity: u128,
    chain_hashes: &[Digest],
) -> Result<(), AssertionRejection> {
    if msg.cid != cid {
        return Err(AssertionRejection::WrongChannel);
    }
    if !chain_hashes.contains(&msg.anchor) {
        return Err(AssertionRejection::UnknownAnchor);
    }
    if msg.state.idx != current.idx + 1 {
        return Err(AssertionRejection::NonMonotonicIndex);
    }
    if msg.state.total() != capacity {
        return Err(AssertionRejection::CapacityViolation);
    }
    let sig = match proposer_role {
        Party::A => &msg.sig_a,
        Party::B => &msg.sig_b,
    };
    if !verify(proposer_pk, &msg.sign_payload(), sig) {
        return Err(AssertionRejection::BadSignature);
    }
    Ok(())
}

/// True when renting a watching service costs more than the channel's
/// total transaction expense, i.e. the watchtower is economically
/// ineffective and assertions are the better fit.
pub fn economics_check(gamma: u128, sum_tx: u128) -> bool {
    sum_tx < gamma
}
