//! On-chain contract machinery: the call ABI, revert reasons, the
//! contract/account store, and the execution engine used by the chain.
//!
//! Execution is transactional. The chain snapshots the whole store before
//! each top-level call and restores it on revert, so a failed call leaves
//! no observable trace. Cross-contract calls run synchronously within the
//! same transaction; the tower's payout fan-out additionally isolates
//! each per-channel sub-call so one misbehaving channel cannot block the
//! others.

pub mod assertion;
pub mod channel;
pub mod tower;

pub use assertion::AssertionChannel;
pub use channel::ChannelContract;
pub use tower::{ConfirmationSet, TowerContract};

use crate::chain::Event;
use crate::crypto::{Digest, PublicKey, Signature};
use crate::types::{ChannelState, Cid, Fraction, Nonce};
use crate::wire::AssertionMessage;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Machine-readable revert reasons; the string codes are part of the
/// simulator ABI and listed in FORMATS.md.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum RevertReason {
    #[error("flag-not-idle")]
    FlagNotIdle,
    #[error("flag-not-ok")]
    FlagNotOk,
    #[error("flag-not-dispute")]
    FlagNotDispute,
    #[error("bad-signature")]
    BadSignature,
    #[error("bad-tx-signature")]
    BadTxSignature,
    #[error("stale-state")]
    StaleState,
    #[error("past-end")]
    PastEnd,
    #[error("too-early")]
    TooEarly,
    #[error("unauthorized")]
    Unauthorized,
    #[error("not-owner")]
    NotOwner,
    #[error("state-mismatch")]
    StateMismatch,
    #[error("wrong-channel")]
    WrongChannel,
    #[error("missing-party")]
    MissingParty,
    #[error("no-closure")]
    NoClosure,
    #[error("no-watchtower")]
    NoWatchtower,
    #[error("insufficient-funds")]
    InsufficientFunds,
    #[error("insufficient-balance")]
    InsufficientBalance,
    #[error("unknown-contract")]
    UnknownContract,
    #[error("unknown-customer")]
    UnknownCustomer,
    #[error("victim-mismatch")]
    VictimMismatch,
    #[error("length-mismatch")]
    LengthMismatch,
    #[error("method-mismatch")]
    MethodMismatch,
    #[error("value-not-allowed")]
    ValueNotAllowed,
}

impl RevertReason {
    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl Serialize for RevertReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Identity of whoever initiated a call: an externally-owned account or
/// another contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Caller {
    Account(PublicKey),
    Contract(Cid),
}

/// A contract method invocation with canonically encodable arguments.
#[derive(Clone, Debug, PartialEq)]
pub enum Call {
    ChannelSetup { tower: Cid, wt_pk: PublicKey },
    ChannelDeposit,
    ChannelClose { state: ChannelState, r: Nonce, sig_a: Signature, sig_b: Signature },
    ChannelDispute { state: ChannelState, r: Nonce, sig_a: Signature, sig_b: Signature },
    ChannelPayout { state: ChannelState, is_pay: bool },
    ChannelChallenge { state: ChannelState, r: Nonce, sig_wt: Signature },
    TowerDeposit { cid: Cid },
    TowerWithdraw { cid: Cid, victim: PublicKey, percentage: Fraction },
    TowerClose { cid: Cid, state: ChannelState },
    TowerUpdate { confs: ConfirmationSet },
    AssertSetup,
    AssertDeposit,
    AssertClose { assertion: AssertionMessage },
    AssertDispute { assertion: AssertionMessage },
    AssertPayout,
}

impl Call {
    pub fn method_name(&self) -> &'static str {
        match self {
            Call::ChannelSetup { .. } => "channel.setup",
            Call::ChannelDeposit => "channel.deposit",
            Call::ChannelClose { .. } => "channel.close",
            Call::ChannelDispute { .. } => "channel.dispute",
            Call::ChannelPayout { .. } => "channel.payout",
            Call::ChannelChallenge { .. } => "channel.challenge",
            Call::TowerDeposit { .. } => "tower.deposit",
            Call::TowerWithdraw { .. } => "tower.withdraw",
            Call::TowerClose { .. } => "tower.close",
            Call::TowerUpdate { .. } => "tower.update",
            Call::AssertSetup => "assert.setup",
            Call::AssertDeposit => "assert.deposit",
            Call::AssertClose { .. } => "assert.close",
            Call::AssertDispute { .. } => "assert.dispute",
            Call::AssertPayout => "assert.payout",
        }
    }

    fn method_tag(&self) -> u8 {
        match self {
            Call::ChannelSetup { .. } => 0xA1,
            Call::ChannelDeposit => 0xA2,
            Call::ChannelClose { .. } => 0xA3,
            Call::ChannelDispute { .. } => 0xA4,
            Call::ChannelPayout { .. } => 0xA5,
            Call::ChannelChallenge { .. } => 0xA6,
            Call::TowerDeposit { .. } => 0xB1,
            Call::TowerWithdraw { .. } => 0xB2,
            Call::TowerClose { .. } => 0xB3,
            Call::TowerUpdate { .. } => 0xB4,
            Call::AssertSetup => 0xD1,
            Call::AssertDeposit => 0xD2,
            Call::AssertClose { .. } => 0xD3,
            Call::AssertDispute { .. } => 0xD4,
            Call::AssertPayout => 0xD5,
        }
    }

    /// Methods that accept attached token value.
    pub fn is_payable(&self) -> bool {
        matches!(
            self,
            Call::ChannelSetup { .. }
                | Call::ChannelDeposit
                | Call::TowerDeposit { .. }
                | Call::AssertSetup
                | Call::AssertDeposit
        )
    }

    /// Canonical argument encoding: method tag byte followed by
    /// fixed-width fields. This is what transaction signatures cover.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.method_tag()];
        match self {
            Call::ChannelSetup { tower, wt_pk } => {
                out.extend_from_slice(&tower.0);
                out.extend_from_slice(&wt_pk.0);
            }
            Call::ChannelDeposit | Call::AssertSetup | Call::AssertDeposit | Call::AssertPayout => {}
            Call::ChannelClose { state, r, sig_a, sig_b }
            | Call::ChannelDispute { state, r, sig_a, sig_b } => {
                out.extend_from_slice(&state.encode());
                out.extend_from_slice(&r.0);
                out.extend_from_slice(&sig_a.0);
                out.extend_from_slice(&sig_b.0);
            }
            Call::ChannelPayout { state, is_pay } => {
                out.extend_from_slice(&state.encode());
                out.push(u8::from(*is_pay));
            }
            Call::ChannelChallenge { state, r, sig_wt } => {
                out.extend_from_slice(&state.encode());
                out.extend_from_slice(&r.0);
                out.extend_from_slice(&sig_wt.0);
            }
            Call::TowerDeposit { cid } => out.extend_from_slice(&cid.0),
            Call::TowerWithdraw { cid, victim, percentage } => {
                out.extend_from_slice(&cid.0);
                out.extend_from_slice(&victim.0);
                out.extend_from_slice(&percentage.num().to_be_bytes());
                out.extend_from_slice(&percentage.den().to_be_bytes());
            }
            Call::TowerClose { cid, state } => {
                out.extend_from_slice(&cid.0);
                out.extend_from_slice(&state.encode());
            }
            Call::TowerUpdate { confs } => out.extend_from_slice(&confs.to_bytes()),
            Call::AssertClose { assertion } | Call::AssertDispute { assertion } => {
                out.extend_from_slice(&assertion.encode());
            }
        }
        out
    }
}

/// One cross-contract call and its outcome, recorded into the enclosing
/// transaction receipt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubCallRecord {
    pub from: Cid,
    pub to: Cid,
    pub method: &'static str,
    pub status: Result<(), RevertReason>,
}

/// A deployed contract instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Contract {
    Channel(ChannelContract),
    Tower(TowerContract),
    Assertion(AssertionChannel),
}

impl Contract {
    pub fn held(&self) -> u128 {
        match self {
            Contract::Channel(c) => c.held,
            Contract::Tower(t) => t.held,
            Contract::Assertion(a) => a.held,
        }
    }

    fn held_mut(&mut self) -> &mut u128 {
        match self {
            Contract::Channel(c) => &mut c.held,
            Contract::Tower(t) => &mut t.held,
            Contract::Assertion(a) => &mut a.held,
        }
    }
}

/// All contract state plus external account balances. Cloned wholesale
/// for transaction atomicity; everything in here is small and ordered
/// so snapshots are cheap and deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContractStore {
    pub contracts: BTreeMap<Cid, Contract>,
    pub accounts: BTreeMap<PublicKey, u128>,
}

impl ContractStore {
    pub fn credit(&mut self, to: PublicKey, amount: u128) {
        if amount > 0 {
            *self.accounts.entry(to).or_insert(0) += amount;
        }
    }

    pub fn debit(&mut self, from: PublicKey, amount: u128) -> Result<(), RevertReason> {
        let balance = self.accounts.entry(from).or_insert(0);
        if *balance < amount {
            return Err(RevertReason::InsufficientBalance);
        }
        *balance -= amount;
        Ok(())
    }

    pub fn balance_of(&self, pk: &PublicKey) -> u128 {
        self.accounts.get(pk).copied().unwrap_or(0)
    }

    /// Sum of account balances and contract-held funds; constant across
    /// every transaction by construction.
    pub fn total_tokens(&self) -> u128 {
        let accounts: u128 = self.accounts.values().sum();
        let held: u128 = self.contracts.values().map(Contract::held).sum();
        accounts + held
    }
}

/// Execution context threaded through contract handlers.
pub struct ExecEnv<'a> {
    /// Height of the block being produced (the contract-visible `now`).
    pub now: u64,
    /// Hashes of already-mined blocks, oldest first. The block being
    /// produced is not yet in here, matching what real contracts see.
    pub block_hashes: &'a [Digest],
    pub store: &'a mut ContractStore,
    /// Events staged by the current transaction; committed on success.
    pub events: &'a mut Vec<Event>,
    /// Cross-contract call records for the transaction receipt.
    pub subcalls: &'a mut Vec<SubCallRecord>,
}

impl ExecEnv<'_> {
    /// The `n` most recent mined block hashes, newest first.
    pub fn recent_hashes(&self, n: u64) -> impl Iterator<Item = &Digest> {
        self.block_hashes.iter().rev().take(n as usize)
    }
}

/// Dispatch a call against a target contract. The target is removed from
/// the store for the duration of the call, so contract handlers get free
/// access to the rest of the store for synchronous cross-contract calls.
pub fn call_contract(
    env: &mut ExecEnv<'_>,
    caller: Caller,
    target: Cid,
    call: &Call,
    value: u128,
) -> Result<(), RevertReason> {
    let mut contract = env
        .store
        .contracts
        .remove(&target)
        .ok_or(RevertReason::UnknownContract)?;
    if value > 0 && !call.is_payable() {
        env.store.contracts.insert(target, contract);
        return Err(RevertReason::ValueNotAllowed);
    }
    *contract.held_mut() += value;
    let result = match &mut contract {
        Contract::Channel(c) => c.handle(env, caller, target, call, value),
        Contract::Tower(t) => t.handle(env, caller, target, call, value),
        Contract::Assertion(a) => a.handle(env, caller, target, call, value),
    };
    env.store.contracts.insert(target, contract);
    if let Caller::Contract(from) = caller {
        env.subcalls.push(SubCallRecord {
            from,
            to: target,
            method: call.method_name(),
            status: result,
        });
    }
    result
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Caller::Account(pk) => write!(f, "account:{pk}"),
            Caller::Contract(cid) => write!(f, "contract:{cid}"),
        }
    }
}

/// Shared contract-test fixture: one funded channel wired to a tower,
/// with helpers for signing states and driving the chain.
#[cfg(test)]
pub(crate) mod testkit {
    use super::*;
    use crate::chain::{ExecStatus, SimChain, Tx};
    use crate::crypto::KeyPair;
    use crate::types::hash_commit;
    use crate::wire::payment_sign_payload;

    pub struct Fixture {
        pub chain: SimChain,
        pub alice: KeyPair,
        pub bob: KeyPair,
        pub wt: KeyPair,
        pub channel: Cid,
        pub tower: Cid,
        seq: u64,
    }

    pub struct TestState {
        pub state: ChannelState,
        pub r: Nonce,
        pub sig_a: Signature,
        pub sig_b: Signature,
    }

    impl Fixture {
        /// Deploy tower + channel and complete setup/deposit/protection,
        /// mining one block. Starting balances follow the worked example:
        /// Alice 10, Bob 0, customer (Bob) deposit 100 at the tower.
        pub fn new(tolerance: u64, fail_safe: u64) -> Fixture {
            Fixture::with_deposits(tolerance, fail_safe, 10, 0, 100)
        }

        pub fn with_deposits(
            tolerance: u64,
            fail_safe: u64,
            deposit_a: u128,
            deposit_b: u128,
            tower_deposit: u128,
        ) -> Fixture {
            let alice = KeyPair::from_label("fixture-alice");
            let bob = KeyPair::from_label("fixture-bob");
            let wt = KeyPair::from_label("fixture-wt");
            let mut chain = SimChain::new();
            chain.fund_account(alice.public(), deposit_a + 1_000);
            chain.fund_account(bob.public(), deposit_b + tower_deposit + 1_000);
            let tower = chain.deploy("tower", Contract::Tower(TowerContract::new(wt.public())));
            let channel = chain.deploy(
                "channel",
                Contract::Channel(ChannelContract::new(tolerance, fail_safe)),
            );
            let mut fx = Fixture { chain, alice, bob, wt, channel, tower, seq: 0 };
            let setup = fx.tx(
                &fx.alice.clone(),
                channel,
                deposit_a,
                Call::ChannelSetup { tower, wt_pk: fx.wt.public() },
            );
            let deposit = fx.tx(&fx.bob.clone(), channel, deposit_b, Call::ChannelDeposit);
            let protect = fx.tx(&fx.bob.clone(), tower, tower_deposit, Call::TowerDeposit { cid: channel });
            fx.submit_all([setup, deposit, protect]);
            fx.mine_ok();
            fx
        }

        pub fn tx(&mut self, kp: &KeyPair, target: Cid, value: u128, call: Call) -> Tx {
            let tx = Tx::signed(kp, self.seq, target, value, call);
            self.seq += 1;
            tx
        }

        pub fn submit_all(&mut self, txs: impl IntoIterator<Item = Tx>) {
            for tx in txs {
                self.chain.submit_tx(tx).expect("known target");
            }
        }

        /// Mine one block and require every included tx to succeed.
        pub fn mine_ok(&mut self) {
            let start = self.chain.receipts().len();
            self.chain.mine_block();
            for receipt in &self.chain.receipts()[start..] {
                assert!(
                    receipt.status.is_ok(),
                    "{} reverted: {:?}",
                    receipt.method,
                    receipt.status
                );
            }
        }

        pub fn mine_until(&mut self, height: u64) {
            while self.chain.now() < height {
                self.chain.mine_block();
            }
        }

        /// Submit one tx, mine, and return its execution status.
        pub fn exec(&mut self, tx: Tx) -> ExecStatus {
            let id = self.chain.submit_tx(tx).expect("known target");
            self.chain.mine_block();
            self.chain
                .receipts()
                .iter()
                .rev()
                .find(|r| r.tx_id == id)
                .expect("mined")
                .status
        }

        /// A state co-signed by both parties, nonce derived from idx.
        pub fn co_signed(&self, bal_a: u128, bal_b: u128, idx: u128) -> TestState {
            self.co_signed_for(self.channel, bal_a, bal_b, idx)
        }

        pub fn co_signed_for(&self, cid: Cid, bal_a: u128, bal_b: u128, idx: u128) -> TestState {
            let state = ChannelState::new(bal_a, bal_b, idx);
            let r = Nonce(crate::crypto::sha256_concat(&[b"fixture-nonce", &idx.to_be_bytes()]).0);
            let payload = payment_sign_payload(&cid, idx, &hash_commit(&state, &r));
            TestState {
                state,
                r,
                sig_a: self.alice.sign(&payload),
                sig_b: self.bob.sign(&payload),
            }
        }

        pub fn close_call(&self, s: &TestState) -> Call {
            Call::ChannelClose { state: s.state, r: s.r, sig_a: s.sig_a, sig_b: s.sig_b }
        }

        pub fn dispute_call(&self, s: &TestState) -> Call {
            Call::ChannelDispute { state: s.state, r: s.r, sig_a: s.sig_a, sig_b: s.sig_b }
        }

        /// Owner-signed confirmation-set update.
        pub fn update_tx(&mut self, bits: Vec<bool>) -> Tx {
            let wt = self.wt.clone();
            self.tx(&wt, self.tower, 0, Call::TowerUpdate { confs: ConfirmationSet::new(bits) })
        }

        pub fn channel_state(&self) -> &ChannelContract {
            match self.chain.contract(&self.channel) {
                Some(Contract::Channel(c)) => c,
                _ => panic!("channel contract missing"),
            }
        }

        pub fn tower_state(&self) -> &TowerContract {
            match self.chain.contract(&self.tower) {
                Some(Contract::Tower(t)) => t,
                _ => panic!("tower contract missing"),
            }
        }

        pub fn balance(&self, kp: &KeyPair) -> u128 {
            self.chain.balance_of(&kp.public())
        }
    }
}
