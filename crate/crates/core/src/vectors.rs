//! Golden wire-format vectors: the canonical worked exchange, frozen as
//! hex. FORMATS.md documents the same bytes; `verify-formats` on the CLI
//! and the acceptance suite both check them.
//!
//! The fixture is the worked example used throughout the tests: a
//! channel funded 10/0, first payment of 3 from A to B, so the signed
//! state is (7, 3, 1). All keys and nonces are derived from fixed
//! labels, and signing is deterministic, so these bytes never change.

use crate::crypto::{sha256_concat, Digest, KeyPair};
use crate::types::{hash_commit, ChannelState, Cid, Nonce};
use crate::wire::{
    payment_sign_payload, receipt_sign_payload, AssertionMessage, PaymentMessage,
    WatchtowerReceipt, WatchtowerSubmission,
};
use thiserror::Error;

/// Frozen hex of the party-to-party payment proposal (165 bytes).
pub const VECTOR_PAYMENT_PROPOSAL: &str = "01bc8c5beb52853c1baa539148c8b3fa0dde1b50000000000000000000000000000000070000000000000000000000000000000300000000000000000000000000000001550c414a297ca548bf9bfadd0d560621f53858e792275e397a2f30b8ed44aa28422332a6cae90b6b9602349dd59c1b33758ec9922ce688bc2ba67b1c25abb54e04dd063b1f0aa7ac15d5c27b45ae7a2f64a13d7c5641261c75bb3a5def466c0c00";
/// Frozen hex of the counter-signature reply (165 bytes).
pub const VECTOR_PAYMENT_REPLY: &str = "01bc8c5beb52853c1baa539148c8b3fa0dde1b50000000000000000000000000000000070000000000000000000000000000000300000000000000000000000000000001550c414a297ca548bf9bfadd0d560621f53858e792275e397a2f30b8ed44aa289a6f557c3ebdd6db0ddfc9f19805481c74d015653f50f7913822a45bfe06f3c476788ee85a8ebb65e2334d0b3e3be50e19da26e6b3a9827ce4a763b52472130600";
/// Frozen hex of the party-to-watchtower submission (198 bytes).
pub const VECTOR_SUBMISSION: &str = "c1bc8c5beb52853c1baa539148c8b3fa0dde1b50d0ee7539df6ec28ff42af427d8a5926bcb3e527b28e5cf71fa452122809e984e00000000000000000000000000000001422332a6cae90b6b9602349dd59c1b33758ec9922ce688bc2ba67b1c25abb54e04dd063b1f0aa7ac15d5c27b45ae7a2f64a13d7c5641261c75bb3a5def466c0c009a6f557c3ebdd6db0ddfc9f19805481c74d015653f50f7913822a45bfe06f3c476788ee85a8ebb65e2334d0b3e3be50e19da26e6b3a9827ce4a763b52472130600";
/// Frozen hex of the watchtower receipt (195 bytes).
pub const VECTOR_RECEIPT: &str = "02bc8c5beb52853c1baa539148c8b3fa0dde1b5000000000000000000000000000000001d0ee7539df6ec28ff42af427d8a5926bcb3e527b28e5cf71fa452122809e984e1d59bd53c1d9b3d04720132b3dacb6ed703eeb78c4890e80f671d10a378660126bddaf4b969dedc10ad03c2fdb0e00780c82ecf2ad63238cd516a52f5ddbd309000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000";
/// Frozen hex of a short-lived assertion for the same state (231 bytes).
pub const VECTOR_ASSERTION: &str = "03c1bc8c5beb52853c1baa539148c8b3fa0dde1b5000000000000000000000000000000007000000000000000000000000000000030000000000000000000000000000000190dde9816038f2d2e6e2a94d120d68686cf97ab7906f13c77d9372a9caaaafbf7e1765327030d0df7677610e51edf37561bb7890a6a120fc4ec56e3d8d55567ccf346a4982596d69b5efce75c76bb00465f1ce4c9ab00718ea63574eb5a1790900a1590ac875ce260456f314b2b1baaeb7b5e7d9231be2a0edb24c9ce2a554dc6451a317571d5c57aff8aba304cbf7a31aa2a7d87032437da5505764a0125feb0800";
/// Frozen hex of a three-entry confirmation set with bits 0,1,1.
pub const VECTOR_CONFS: &str = "000360";

pub struct VectorExchange {
    pub cid: Cid,
    pub state: ChannelState,
    pub r: Nonce,
    pub proposal: PaymentMessage,
    pub reply: PaymentMessage,
    pub submission: WatchtowerSubmission,
    pub receipt: WatchtowerReceipt,
    pub assertion: AssertionMessage,
}

/// Rebuild the canonical exchange from its fixed labels.
pub fn build_vector_exchange() -> VectorExchange {
    let alice = KeyPair::from_label("vector-alice");
    let bob = KeyPair::from_label("vector-bob");
    let wt = KeyPair::from_label("vector-wt");
    let cid = Cid::derive("vector-channel", 0);
    let state = ChannelState::new(7, 3, 1);
    let r = Nonce(sha256_concat(&[b"vector-nonce-1"]).0);
    let h = hash_commit(&state, &r);
    let payload = payment_sign_payload(&cid, state.idx, &h);
    let sig_a = alice.sign(&payload);
    let sig_b = bob.sign(&payload);
    let receipt_sig = wt.sign(&receipt_sign_payload(&cid, state.idx, &h));
    let anchor = Digest(sha256_concat(&[b"vector-anchor"]).0);
    let assertion_payload = crate::wire::assertion_sign_payload(&state, &anchor);
    VectorExchange {
        cid,
        state,
        r,
        proposal: PaymentMessage { cid, state, r, sig: sig_a },
        reply: PaymentMessage { cid, state, r, sig: sig_b },
        submission: WatchtowerSubmission { cid, h_s: h, idx: state.idx, sig_a, sig_b },
        receipt: WatchtowerReceipt { cid, idx: state.idx, h_s: h, sig_wt: receipt_sig },
        assertion: AssertionMessage {
            cid,
            state,
            anchor,
            sig_a: alice.sign(&assertion_payload),
            sig_b: bob.sign(&assertion_payload),
        },
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VectorError {
    #[error("{name}: encoded bytes differ from the frozen vector")]
    Mismatch { name: &'static str },
    #[error("{name}: wrong length {got}, expected {expected}")]
    WrongLength { name: &'static str, got: usize, expected: usize },
    #[error("{name}: decode failed: {detail}")]
    Decode { name: &'static str, detail: String },
}

fn check(
    name: &'static str,
    encoded: &[u8],
    frozen_hex: &str,
    expected_len: usize,
) -> Result<(), VectorError> {
    if encoded.len() != expected_len {
        return Err(VectorError::WrongLength { name, got: encoded.len(), expected: expected_len });
    }
    if hex::encode(encoded) != frozen_hex {
        return Err(VectorError::Mismatch { name });
    }
    Ok(())
}

/// Verify every golden vector: regenerate, compare against the frozen
/// hex, and round-trip through decode.
pub fn verify_format_vectors() -> Result<(), VectorError> {
    let v = build_vector_exchange();

    let proposal = v.proposal.encode();
    check("payment proposal", &proposal, VECTOR_PAYMENT_PROPOSAL, 165)?;
    let decoded = PaymentMessage::decode(&proposal)
        .map_err(|e| VectorError::Decode { name: "payment proposal", detail: e.to_string() })?;
    if decoded != v.proposal {
        return Err(VectorError::Mismatch { name: "payment proposal round-trip" });
    }

    let reply = v.reply.encode();
    check("payment reply", &reply, VECTOR_PAYMENT_REPLY, 165)?;

    let submission = v.submission.encode();
    check("watchtower submission", &submission, VECTOR_SUBMISSION, 198)?;
    let decoded = WatchtowerSubmission::decode(&submission)
        .map_err(|e| VectorError::Decode { name: "watchtower submission", detail: e.to_string() })?;
    if decoded != v.submission {
        return Err(VectorError::Mismatch { name: "watchtower submission round-trip" });
    }

    let receipt = v.receipt.encode();
    check("watchtower receipt", &receipt, VECTOR_RECEIPT, 195)?;
    let decoded = WatchtowerReceipt::decode(&receipt)
        .map_err(|e| VectorError::Decode { name: "watchtower receipt", detail: e.to_string() })?;
    if decoded != v.receipt {
        return Err(VectorError::Mismatch { name: "watchtower receipt round-trip" });
    }

    let assertion = v.assertion.encode();
    check("assertion", &assertion, VECTOR_ASSERTION, 231)?;
    let decoded = AssertionMessage::decode(&assertion)
        .map_err(|e| VectorError::Decode { name: "assertion", detail: e.to_string() })?;
    if decoded != v.assertion {
        return Err(VectorError::Mismatch { name: "assertion round-trip" });
    }

    let confs = crate::contracts::ConfirmationSet::new(vec![false, true, true]);
    check("confirmation set", &confs.to_bytes(), VECTOR_CONFS, 3)?;

    Ok(())
}
