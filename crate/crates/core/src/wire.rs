//! Byte-exact wire formats and signed-payload layouts.
//!
//! Three messages travel between the protocol participants, with pinned
//! sizes:
//!
//! * party <-> party payment message: 165 bytes
//! * party -> watchtower submission: 198 bytes
//! * watchtower -> party receipt: 195 bytes
//!
//! The payment and receipt messages fold their type tag over the leading
//! version byte of the contract address (every simulator address starts
//! with [`CONTRACT_ADDR_VERSION`]), which is how the pinned totals are
//! met. The submission carries the full 20-byte address and no tag. The
//! short-lived assertion message (231 bytes) carries both.
//!
//! Signed payloads are domain-separated by a leading tag byte so a
//! signature from one context can never be replayed in another. See
//! FORMATS.md for the full layout tables and golden vectors.

use crate::crypto::{Digest, Signature, DIGEST_LEN};
use crate::types::{ChannelState, Cid, Nonce, CID_LEN};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Signed-payload and wire-message domain tags.
pub const TAG_PAYMENT: u8 = 0x01;
pub const TAG_RECEIPT: u8 = 0x02;
pub const TAG_ASSERTION: u8 = 0x03;
pub const TAG_TX: u8 = 0x10;

pub const PAYMENT_MSG_LEN: usize = 165;
pub const SUBMISSION_LEN: usize = 198;
pub const RECEIPT_LEN: usize = 195;
pub const ASSERTION_MSG_LEN: usize = 231;

/// Reserved trailing bytes of the receipt message, fixed to zero.
pub const RECEIPT_RESERVED_LEN: usize = 62;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("{kind}: expected {expected} bytes, got {got}")]
    BadLength {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("bad message tag: expected {expected:#04x}, got {got:#04x}")]
    BadTag { expected: u8, got: u8 },
    #[error("address does not start with the contract version byte")]
    BadAddressByte,
    #[error("reserved receipt bytes are not zero")]
    BadPadding,
}

/// Payload both parties sign for an off-chain payment:
/// tag || cid || idx || H(state || r).
pub fn payment_sign_payload(cid: &Cid, idx: u128, h_s: &Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + CID_LEN + 16 + DIGEST_LEN);
    out.push(TAG_PAYMENT);
    out.extend_from_slice(&cid.0);
    out.extend_from_slice(&idx.to_be_bytes());
    out.extend_from_slice(&h_s.0);
    out
}

/// Payload the watchtower signs when issuing a receipt. Same fields as
/// the payment payload under a distinct tag.
pub fn receipt_sign_payload(cid: &Cid, idx: u128, h_s: &Digest) -> Vec<u8> {
    let mut out = payment_sign_payload(cid, idx, h_s);
    out[0] = TAG_RECEIPT;
    out
}

/// Payload both parties sign for a short-lived assertion:
/// tag || bal_a || bal_b || idx || anchor block hash.
pub fn assertion_sign_payload(state: &ChannelState, anchor: &Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 48 + DIGEST_LEN);
    out.push(TAG_ASSERTION);
    out.extend_from_slice(&state.encode());
    out.extend_from_slice(&anchor.0);
    out
}

/// Party-to-party payment message: the proposed state, its blinding
/// nonce, and the sender's signature over the payment payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentMessage {
    pub cid: Cid,
    pub state: ChannelState,
    pub r: Nonce,
    pub sig: Signature,
}

impl PaymentMessage {
    pub fn encode(&self) -> [u8; PAYMENT_MSG_LEN] {
        let mut out = [0u8; PAYMENT_MSG_LEN];
        out[0] = TAG_PAYMENT;
        out[1..20].copy_from_slice(self.cid.tail());
        out[20..68].copy_from_slice(&self.state.encode());
        out[68..100].copy_from_slice(&self.r.0);
        out[100..165].copy_from_slice(&self.sig.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<PaymentMessage, WireError> {
        if bytes.len() != PAYMENT_MSG_LEN {
            return Err(WireError::BadLength {
                kind: "payment message",
                expected: PAYMENT_MSG_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != TAG_PAYMENT {
            return Err(WireError::BadTag {
                expected: TAG_PAYMENT,
                got: bytes[0],
            });
        }
        Ok(PaymentMessage {
            cid: Cid::from_tail(&bytes[1..20]).expect("fixed split"),
            state: ChannelState::decode(bytes[20..68].try_into().expect("fixed split")),
            r: Nonce::from_slice(&bytes[68..100]).expect("fixed split"),
            sig: Signature::from_slice(&bytes[100..165]).expect("fixed split"),
        })
    }
}

/// Party-to-watchtower submission: the blinded commitment and both
/// signatures, never the balances or the nonce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchtowerSubmission {
    pub cid: Cid,
    pub h_s: Digest,
    pub idx: u128,
    pub sig_a: Signature,
    pub sig_b: Signature,
}

impl WatchtowerSubmission {
    pub fn encode(&self) -> [u8; SUBMISSION_LEN] {
        let mut out = [0u8; SUBMISSION_LEN];
        out[0..20].copy_from_slice(&self.cid.0);
        out[20..52].copy_from_slice(&self.h_s.0);
        out[52..68].copy_from_slice(&self.idx.to_be_bytes());
        out[68..133].copy_from_slice(&self.sig_a.0);
        out[133..198].copy_from_slice(&self.sig_b.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<WatchtowerSubmission, WireError> {
        if bytes.len() != SUBMISSION_LEN {
            return Err(WireError::BadLength {
                kind: "watchtower submission",
                expected: SUBMISSION_LEN,
                got: bytes.len(),
            });
        }
        let cid = Cid::from_slice(&bytes[0..20]).ok_or(WireError::BadAddressByte)?;
        Ok(WatchtowerSubmission {
            cid,
            h_s: Digest::from_slice(&bytes[20..52]).expect("fixed split"),
            idx: u128::from_be_bytes(bytes[52..68].try_into().expect("fixed split")),
            sig_a: Signature::from_slice(&bytes[68..133]).expect("fixed split"),
            sig_b: Signature::from_slice(&bytes[133..198]).expect("fixed split"),
        })
    }
}

/// Watchtower-to-party receipt: proof that the watchtower recorded the
/// submitted commitment as the channel's latest state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchtowerReceipt {
    pub cid: Cid,
    pub idx: u128,
    pub h_s: Digest,
    pub sig_wt: Signature,
}

impl WatchtowerReceipt {
    pub fn encode(&self) -> [u8; RECEIPT_LEN] {
        let mut out = [0u8; RECEIPT_LEN];
        out[0] = TAG_RECEIPT;
        out[1..20].copy_from_slice(self.cid.tail());
        out[20..36].copy_from_slice(&self.idx.to_be_bytes());
        out[36..68].copy_from_slice(&self.h_s.0);
        out[68..133].copy_from_slice(&self.sig_wt.0);
        // out[133..195] stays zero: reserved framing/session bytes.
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<WatchtowerReceipt, WireError> {
        if bytes.len() != RECEIPT_LEN {
            return Err(WireError::BadLength {
                kind: "watchtower receipt",
                expected: RECEIPT_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != TAG_RECEIPT {
            return Err(WireError::BadTag {
                expected: TAG_RECEIPT,
                got: bytes[0],
            });
        }
        if bytes[133..195].iter().any(|&b| b != 0) {
            return Err(WireError::BadPadding);
        }
        Ok(WatchtowerReceipt {
            cid: Cid::from_tail(&bytes[1..20]).expect("fixed split"),
            idx: u128::from_be_bytes(bytes[20..36].try_into().expect("fixed split")),
            h_s: Digest::from_slice(&bytes[36..68]).expect("fixed split"),
            sig_wt: Signature::from_slice(&bytes[68..133]).expect("fixed split"),
        })
    }
}

/// Short-lived assertion message: a state co-signed together with a
/// recent block hash. During the exchange one signature slot may still
/// hold [`Signature::PLACEHOLDER`]; a completed assertion has both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionMessage {
    pub cid: Cid,
    pub state: ChannelState,
    pub anchor: Digest,
    pub sig_a: Signature,
    pub sig_b: Signature,
}

impl AssertionMessage {
    pub fn encode(&self) -> [u8; ASSERTION_MSG_LEN] {
        let mut out = [0u8; ASSERTION_MSG_LEN];
        out[0] = TAG_ASSERTION;
        out[1..21].copy_from_slice(&self.cid.0);
        out[21..69].copy_from_slice(&self.state.encode());
        out[69..101].copy_from_slice(&self.anchor.0);
        out[101..166].copy_from_slice(&self.sig_a.0);
        out[166..231].copy_from_slice(&self.sig_b.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<AssertionMessage, WireError> {
        if bytes.len() != ASSERTION_MSG_LEN {
            return Err(WireError::BadLength {
                kind: "assertion message",
                expected: ASSERTION_MSG_LEN,
                got: bytes.len(),
            });
        }
        if bytes[0] != TAG_ASSERTION {
            return Err(WireError::BadTag {
                expected: TAG_ASSERTION,
                got: bytes[0],
            });
        }
        let cid = Cid::from_slice(&bytes[1..21]).ok_or(WireError::BadAddressByte)?;
        Ok(AssertionMessage {
            cid,
            state: ChannelState::decode(bytes[21..69].try_into().expect("fixed split")),
            anchor: Digest::from_slice(&bytes[69..101]).expect("fixed split"),
            sig_a: Signature::from_slice(&bytes[101..166]).expect("fixed split"),
            sig_b: Signature::from_slice(&bytes[166..231]).expect("fixed split"),
        })
    }

    pub fn sign_payload(&self) -> Vec<u8> {
        assertion_sign_payload(&self.state, &self.anchor)
    }
}
