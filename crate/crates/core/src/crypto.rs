//! Hashing, key pairs, and the fixed 65-byte signature encoding.
//!
//! Every signature produced here is deterministic for a given key and
//! message, so simulation traces replay byte-for-byte. The scheme is
//! Ed25519 with a one-byte trailing version field padding the signature
//! to the 65-byte wire width used throughout the protocol.

use ed25519_dalek::{Signer as _, Verifier as _};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::fmt;

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 65;

/// Trailing byte appended to the 64-byte Ed25519 signature to reach the
/// fixed 65-byte encoding. Verification rejects any other value.
pub const SIGNATURE_VERSION: u8 = 0x00;

/// 32-byte output of the artifact-wide hash function (SHA-256).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Digest> {
        bytes.try_into().ok().map(Digest)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Hash a sequence of byte slices as one message.
pub fn sha256_concat(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

/// Ed25519 verifying key; doubles as a party's account identity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Fixed 65-byte signature: 64-byte Ed25519 signature plus one version byte.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    /// All-zero placeholder used while a message is only half-signed.
    pub const PLACEHOLDER: Signature = Signature([0u8; SIGNATURE_LEN]);

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Signature> {
        bytes.try_into().ok().map(Signature)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

/// Signing key plus cached verifying key.
#[derive(Clone)]
pub struct KeyPair {
    signing: ed25519_dalek::SigningKey,
    public: PublicKey,
}

impl KeyPair {
    /// Derive a key pair from a 32-byte seed. The same seed always yields
    /// the same keys, which keeps scenario runs reproducible.
    pub fn from_seed(seed: [u8; 32]) -> KeyPair {
        let signing = ed25519_dalek::SigningKey::from_bytes(&seed);
        let public = PublicKey(signing.verifying_key().to_bytes());
        KeyPair { signing, public }
    }

    /// Derive a key pair from a label, for fixed test and vector identities.
    pub fn from_label(label: &str) -> KeyPair {
        KeyPair::from_seed(sha256_concat(&[b"keypair-seed:", label.as_bytes()]).0)
    }

    /// Draw a key pair from a seedable generator.
    pub fn generate(rng: &mut impl RngCore) -> KeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        KeyPair::from_seed(seed)
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    /// Sign a message. Ed25519 signing is deterministic, so calling this
    /// twice with the same inputs produces identical bytes.
    pub fn sign(&self, message: &[u8]) -> Signature {
        let sig = self.signing.sign(message);
        let mut out = [0u8; SIGNATURE_LEN];
        out[..64].copy_from_slice(&sig.to_bytes());
        out[64] = SIGNATURE_VERSION;
        Signature(out)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair(pk={})", self.public.to_hex())
    }
}

/// Check a signature. Malformed bytes (including a wrong version byte)
/// return false rather than an error.
pub fn verify(pk: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    if sig.0[64] != SIGNATURE_VERSION {
        return false;
    }
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let raw: [u8; 64] = sig.0[..64].try_into().expect("fixed split");
    vk.verify(message, &ed25519_dalek::Signature::from_bytes(&raw))
        .is_ok()
}

// Hex-string serde for all fixed-size byte types keeps JSON traces readable
// and byte-stable.
macro_rules! hex_serde {
    ($ty:ident, $len:expr) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
                let arr: [u8; $len] = bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("wrong length"))?;
                Ok($ty(arr))
            }
        }
    };
}

hex_serde!(Digest, DIGEST_LEN);
hex_serde!(PublicKey, PUBLIC_KEY_LEN);
hex_serde!(Signature, SIGNATURE_LEN);

pub(crate) use hex_serde;
