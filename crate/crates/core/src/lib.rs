//! Bidirectional payment channels protected by fail-safe watchtowers,
//! plus the complementary short-lived assertion mechanism, built on a
//! deterministic single-chain simulator.
//!
//! The crate is organized around the protocol's moving parts:
//!
//! * [`crypto`], [`types`], [`wire`] — canonical encodings, hashing,
//!   signatures, and the byte-exact message formats.
//! * [`chain`] — the deterministic block producer and event log.
//! * [`contracts`] — the channel contract, the tower contract, and the
//!   assertion-channel variant, all executed inside the simulator.
//! * [`protocol`] — the off-chain signed payment exchange.
//! * [`watchtower`] — the off-chain watching service.
//! * [`assertions`] — short-lived assertion helpers and freshness policy.
//! * [`harness`] — scenario configs, actors, adversaries, the runner,
//!   traces, and metrics.

pub mod assertions;
pub mod chain;
pub mod contracts;
pub mod crypto;
pub mod harness;
pub mod protocol;
pub mod vectors;
pub mod types;
pub mod watchtower;
pub mod wire;

pub use chain::{Block, Event, EventKind, SimChain, Tx, TxReceipt};
pub use contracts::{AssertionChannel, ChannelContract, ConfirmationSet, Contract, TowerContract};
pub use crypto::{Digest, KeyPair, PublicKey, Signature};
pub use types::{ChannelState, Cid, Fraction, Nonce, Party};
pub use watchtower::WatchtowerService;
