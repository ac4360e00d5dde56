//! Shared domain value types: channel states, contract addresses, nonces,
//! and the exact-fraction type used for the linear penalty.

use crate::crypto::{self, Digest};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const CID_LEN: usize = 20;
pub const NONCE_LEN: usize = 32;
pub const STATE_ENCODING_LEN: usize = 48;

/// First byte of every contract address minted by the simulator. Wire
/// formats that fold a message tag over the address rely on this byte
/// being reconstructible.
pub const CONTRACT_ADDR_VERSION: u8 = 0xC1;

/// An off-chain channel state: both balances plus the monotonic
/// transaction index. This tuple is what every signature covers.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ChannelState {
    pub bal_a: u128,
    pub bal_b: u128,
    pub idx: u128,
}

impl ChannelState {
    pub fn new(bal_a: u128, bal_b: u128, idx: u128) -> ChannelState {
        ChannelState { bal_a, bal_b, idx }
    }

    /// Total value locked in the state.
    pub fn total(&self) -> u128 {
        self.bal_a + self.bal_b
    }

    /// Canonical fixed-width encoding: bal_a (16B BE) || bal_b (16B BE) ||
    /// idx (16B BE). Injective by construction.
    pub fn encode(&self) -> [u8; STATE_ENCODING_LEN] {
        let mut out = [0u8; STATE_ENCODING_LEN];
        out[0..16].copy_from_slice(&self.bal_a.to_be_bytes());
        out[16..32].copy_from_slice(&self.bal_b.to_be_bytes());
        out[32..48].copy_from_slice(&self.idx.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8; STATE_ENCODING_LEN]) -> ChannelState {
        ChannelState {
            bal_a: u128::from_be_bytes(bytes[0..16].try_into().expect("fixed split")),
            bal_b: u128::from_be_bytes(bytes[16..32].try_into().expect("fixed split")),
            idx: u128::from_be_bytes(bytes[32..48].try_into().expect("fixed split")),
        }
    }
}

impl fmt::Display for ChannelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.bal_a, self.bal_b, self.idx)
    }
}

/// Which side of a channel a participant sits on.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::A => f.write_str("A"),
            Party::B => f.write_str("B"),
        }
    }
}

/// 20-byte contract address. Unique per deployed contract within one
/// simulation; the first byte is always [`CONTRACT_ADDR_VERSION`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cid(pub [u8; CID_LEN]);

impl Cid {
    /// Mint a deterministic contract address from a deployment label and
    /// sequence number.
    pub fn derive(label: &str, seq: u64) -> Cid {
        let digest = crypto::sha256_concat(&[b"contract-addr:", label.as_bytes(), &seq.to_be_bytes()]);
        let mut out = [0u8; CID_LEN];
        out[0] = CONTRACT_ADDR_VERSION;
        out[1..].copy_from_slice(&digest.0[..CID_LEN - 1]);
        Cid(out)
    }

    pub fn as_bytes(&self) -> &[u8; CID_LEN] {
        &self.0
    }

    /// The 19 bytes following the version byte; this is what travels on
    /// the wire when a message tag is folded over the address.
    pub fn tail(&self) -> &[u8] {
        &self.0[1..]
    }

    pub fn from_tail(tail: &[u8]) -> Option<Cid> {
        if tail.len() != CID_LEN - 1 {
            return None;
        }
        let mut out = [0u8; CID_LEN];
        out[0] = CONTRACT_ADDR_VERSION;
        out[1..].copy_from_slice(tail);
        Some(Cid(out))
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Cid> {
        let arr: [u8; CID_LEN] = bytes.try_into().ok()?;
        if arr[0] != CONTRACT_ADDR_VERSION {
            return None;
        }
        Some(Cid(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({})", self.to_hex())
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// 256-bit random blinding value paired with each channel state before
/// hashing, so the commitment reveals nothing about low-entropy balances.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub const ZERO: Nonce = Nonce([0u8; NONCE_LEN]);

    pub fn random(rng: &mut impl RngCore) -> Nonce {
        let mut out = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut out);
        Nonce(out)
    }

    pub fn as_bytes(&self) -> &[u8; NONCE_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Nonce> {
        bytes.try_into().ok().map(Nonce)
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", self.to_hex())
    }
}

crypto::hex_serde!(Cid, CID_LEN);
crypto::hex_serde!(Nonce, NONCE_LEN);

/// Blinded state commitment: H(encode(state) || r).
pub fn hash_commit(state: &ChannelState, r: &Nonce) -> Digest {
    crypto::sha256_concat(&[&state.encode(), &r.0])
}

/// Exact non-negative fraction, used for the linear penalty so that no
/// rounding happens before the final token transfer floors.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Fraction {
    num: u128,
    den: u128,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    /// Panics if `den` is zero.
    pub fn new(num: u128, den: u128) -> Fraction {
        assert!(den != 0, "fraction denominator must be non-zero");
        Fraction { num, den }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    /// Clamp the value to at most one.
    pub fn min_one(self) -> Fraction {
        if self.num > self.den {
            Fraction { num: self.den, den: self.den }
        } else {
            self
        }
    }

    /// floor(amount * self). Requires self <= 1 after clamping by callers;
    /// split multiplication avoids overflow for realistic denominators.
    pub fn floor_mul(&self, amount: u128) -> u128 {
        let whole = (amount / self.den) * self.num;
        let rem = ((amount % self.den) * self.num) / self.den;
        whole + rem
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Fraction) -> bool {
        self.num * other.den == other.num * self.den
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Fraction) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Fraction) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
