//! The watchtower's contract: customer deposits keyed by channel
//! address, a pending-closure ledger keyed by the update counter `k`,
//! and the periodic confirmation-set intake that fans payout decisions
//! out to the channel contracts.

use super::{call_contract, Call, Caller, ExecEnv, RevertReason};
use crate::crypto::PublicKey;
use crate::types::{ChannelState, Cid, Fraction};
use crate::wire::WireError;
use std::collections::BTreeMap;

/// One bit per pending closure: 1 allows payout, 0 denies it and
/// triggers the fail-safe extension. Serialized as a 2-byte big-endian
/// length followed by ceil(m/8) bytes, most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConfirmationSet {
    bits: Vec<bool>,
}

impl ConfirmationSet {
    pub fn new(bits: Vec<bool>) -> ConfirmationSet {
        ConfirmationSet { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, j: usize) -> bool {
        self.bits[j]
    }

    /// Payload bytes excluding the 2-byte length prefix.
    pub fn bitmap_len(&self) -> usize {
        self.bits.len().div_ceil(8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.bits.len();
        let mut out = vec![0u8; 2 + m.div_ceil(8)];
        out[0..2].copy_from_slice(&u16::try_from(m).expect("bitmap too large").to_be_bytes());
        for (j, &bit) in self.bits.iter().enumerate() {
            if bit {
                out[2 + j / 8] |= 1 << (7 - j % 8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ConfirmationSet, WireError> {
        if bytes.len() < 2 {
            return Err(WireError::BadLength { kind: "confirmation set", expected: 2, got: bytes.len() });
        }
        let m = usize::from(u16::from_be_bytes([bytes[0], bytes[1]]));
        let expected = 2 + m.div_ceil(8);
        if bytes.len() != expected {
            return Err(WireError::BadLength { kind: "confirmation set", expected, got: bytes.len() });
        }
        let bits = (0..m)
            .map(|j| (bytes[2 + j / 8] >> (7 - j % 8)) & 1 == 1)
            .collect();
        Ok(ConfirmationSet { bits })
    }
}

/// A customer's protection account for one channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CustomerEntry {
    pub customer: PublicKey,
    pub deposit: u128,
}

/// Pending closures collected during one update period, in arrival
/// order. `states[j]` tracks the closing state of `cids[j]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PendingEntry {
    pub cids: Vec<Cid>,
    pub states: Vec<ChannelState>,
}

impl PendingEntry {
    pub fn len(&self) -> usize {
        self.cids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cids.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TowerContract {
    pub owner: PublicKey,
    pub held: u128,
    pub balances: BTreeMap<Cid, CustomerEntry>,
    pub entries: BTreeMap<u64, PendingEntry>,
    /// Update counter; closures land in entry `k`, each update answers
    /// the entry it closes over and moves on.
    pub k: u64,
}

impl TowerContract {
    pub fn new(owner: PublicKey) -> TowerContract {
        TowerContract {
            owner,
            held: 0,
            balances: BTreeMap::new(),
            entries: BTreeMap::new(),
            k: 0,
        }
    }

    /// The entry the next update will answer.
    pub fn pending(&self) -> Option<&PendingEntry> {
        self.entries.get(&self.k)
    }

    pub fn handle(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        self_addr: Cid,
        call: &Call,
        value: u128,
    ) -> Result<(), RevertReason> {
        match call {
            Call::TowerDeposit { cid } => self.deposit(caller, *cid, value),
            Call::TowerWithdraw { cid, victim, percentage } => {
                self.withdraw(env, caller, *cid, *victim, *percentage)
            }
            Call::TowerClose { cid, state } => self.close(caller, *cid, *state),
            Call::TowerUpdate { confs } => self.update(env, caller, self_addr, confs),
            _ => Err(RevertReason::MethodMismatch),
        }
    }

    fn deposit(&mut self, caller: Caller, cid: Cid, value: u128) -> Result<(), RevertReason> {
        let Caller::Account(sender) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        match self.balances.get_mut(&cid) {
            Some(entry) => {
                entry.customer = sender;
                entry.deposit += value;
            }
            None => {
                self.balances.insert(cid, CustomerEntry { customer: sender, deposit: value });
            }
        }
        Ok(())
    }

    fn withdraw(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        cid: Cid,
        victim: PublicKey,
        percentage: Fraction,
    ) -> Result<(), RevertReason> {
        // Only the channel contract being referenced may trigger a payout
        // of its customer's protection deposit.
        if caller != Caller::Contract(cid) {
            return Err(RevertReason::Unauthorized);
        }
        let entry = self.balances.get_mut(&cid).ok_or(RevertReason::UnknownCustomer)?;
        if victim != entry.customer {
            return Err(RevertReason::VictimMismatch);
        }
        let amount = percentage.min_one().floor_mul(entry.deposit);
        entry.deposit -= amount;
        self.held -= amount;
        env.store.credit(victim, amount);
        Ok(())
    }

    fn close(&mut self, caller: Caller, cid: Cid, state: ChannelState) -> Result<(), RevertReason> {
        if caller != Caller::Contract(cid) {
            return Err(RevertReason::Unauthorized);
        }
        let entry = self.entries.entry(self.k).or_default();
        match entry.cids.iter().position(|c| *c == cid) {
            // Dispute overwrite: the channel re-notified us with a newer
            // state within the same period.
            Some(i) => entry.states[i] = state,
            None => {
                entry.cids.push(cid);
                entry.states.push(state);
            }
        }
        Ok(())
    }

    fn update(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        self_addr: Cid,
        confs: &ConfirmationSet,
    ) -> Result<(), RevertReason> {
        if caller != Caller::Account(self.owner) {
            return Err(RevertReason::NotOwner);
        }
        let pending_len = self.entries.get(&self.k).map_or(0, PendingEntry::len);
        if confs.len() != pending_len {
            return Err(RevertReason::LengthMismatch);
        }
        let n = self.k;
        self.k += 1;
        self.respond(env, self_addr, confs, n);
        Ok(())
    }

    /// Fan the confirmation bits out as payout calls, one per pending
    /// closure, then delete the entry. A reverting payout on one channel
    /// must not block the rest, so each sub-call is isolated: its store
    /// and event mutations are rolled back while its receipt record stays.
    fn respond(&mut self, env: &mut ExecEnv<'_>, self_addr: Cid, confs: &ConfirmationSet, n: u64) {
        let entry = self.entries.remove(&n).unwrap_or_default();
        for (j, (cid, state)) in entry.cids.iter().zip(entry.states.iter()).enumerate() {
            let call = Call::ChannelPayout { state: *state, is_pay: confs.bit(j) };
            let snapshot = env.store.clone();
            let event_mark = env.events.len();
            let result = call_contract(env, Caller::Contract(self_addr), *cid, &call, 0);
            if result.is_err() {
                *env.store = snapshot;
                env.events.truncate(event_mark);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ExecStatus;
    use crate::contracts::testkit::Fixture;
    use crate::contracts::{ChannelContract, Contract, RevertReason};
    use crate::crypto::KeyPair;

    #[test]
    fn deposit_accumulates_and_overwrites_customer() {
        let mut fx = Fixture::new(8, 40);
        let channel = fx.channel;
        let tower = fx.tower;
        assert_eq!(fx.tower_state().balances[&channel].deposit, 100);

        let bob = fx.bob.clone();
        let tx = fx.tx(&bob, tower, 50, Call::TowerDeposit { cid: channel });
        assert_eq!(fx.exec(tx), ExecStatus::Ok);
        assert_eq!(fx.tower_state().balances[&channel].deposit, 150);
        assert_eq!(fx.tower_state().balances[&channel].customer, bob.public());

        // A later depositor takes over the customer slot, as written.
        let alice = fx.alice.clone();
        let tx = fx.tx(&alice, tower, 10, Call::TowerDeposit { cid: channel });
        assert_eq!(fx.exec(tx), ExecStatus::Ok);
        assert_eq!(fx.tower_state().balances[&channel].deposit, 160);
        assert_eq!(fx.tower_state().balances[&channel].customer, alice.public());
    }

    #[test]
    fn withdraw_requires_the_channel_contract_as_caller() {
        let mut fx = Fixture::new(8, 40);
        let channel = fx.channel;
        let tower = fx.tower;
        let bob = fx.bob.clone();
        let tx = fx.tx(
            &bob,
            tower,
            0,
            Call::TowerWithdraw { cid: channel, victim: bob.public(), percentage: Fraction::ONE },
        );
        assert_eq!(fx.exec(tx), ExecStatus::Reverted(RevertReason::Unauthorized));
    }

    #[test]
    fn withdraw_clamps_percentage_and_checks_victim() {
        let owner = KeyPair::from_label("owner");
        let customer = KeyPair::from_label("customer");
        let other = KeyPair::from_label("other");
        let cid = Cid::derive("channel", 9);
        let mut tower = TowerContract::new(owner.public());
        tower.held = 100;
        tower
            .balances
            .insert(cid, CustomerEntry { customer: customer.public(), deposit: 100 });

        let mut store = crate::contracts::ContractStore::default();
        let mut events = vec![];
        let mut subcalls = vec![];
        let mut env = crate::contracts::ExecEnv {
            now: 0,
            block_hashes: &[],
            store: &mut store,
            events: &mut events,
            subcalls: &mut subcalls,
        };

        assert_eq!(
            tower.withdraw(&mut env, Caller::Contract(cid), cid, other.public(), Fraction::ONE),
            Err(RevertReason::VictimMismatch)
        );
        // 3/2 clamps to the full remaining deposit, never more.
        tower
            .withdraw(&mut env, Caller::Contract(cid), cid, customer.public(), Fraction::new(3, 2))
            .unwrap();
        assert_eq!(tower.balances[&cid].deposit, 0);
        assert_eq!(tower.held, 0);
        assert_eq!(env.store.balance_of(&customer.public()), 100);
    }

    #[test]
    fn close_from_account_reverts() {
        let mut fx = Fixture::new(8, 40);
        let channel = fx.channel;
        let tower = fx.tower;
        let alice = fx.alice.clone();
        let state = ChannelState::new(4, 6, 2);
        let tx = fx.tx(&alice, tower, 0, Call::TowerClose { cid: channel, state });
        assert_eq!(fx.exec(tx), ExecStatus::Reverted(RevertReason::Unauthorized));
    }

    /// Three channels sharing the fixture's parties, all closing within
    /// one period.
    fn three_channel_fixture() -> (Fixture, Vec<Cid>) {
        let mut fx = Fixture::new(8, 40);
        let mut channels = vec![fx.channel];
        for i in 0..2 {
            let cid = fx.chain.deploy(
                &format!("channel-extra-{i}"),
                Contract::Channel(ChannelContract::new(8, 40)),
            );
            let alice = fx.alice.clone();
            let bob = fx.bob.clone();
            let tower = fx.tower;
            let wt_pk = fx.wt.public();
            let setup = fx.tx(&alice, cid, 10, Call::ChannelSetup { tower, wt_pk });
            let deposit = fx.tx(&bob, cid, 0, Call::ChannelDeposit);
            fx.submit_all([setup, deposit]);
            fx.mine_ok();
            channels.push(cid);
        }
        (fx, channels)
    }

    fn close_all(fx: &mut Fixture, channels: &[Cid], states: &[ChannelState]) {
        let alice = fx.alice.clone();
        let txs: Vec<_> = channels
            .iter()
            .zip(states)
            .map(|(cid, state)| {
                let signed = fx.co_signed_for(*cid, state.bal_a, state.bal_b, state.idx);
                fx.tx(
                    &alice,
                    *cid,
                    0,
                    Call::ChannelClose {
                        state: signed.state,
                        r: signed.r,
                        sig_a: signed.sig_a,
                        sig_b: signed.sig_b,
                    },
                )
            })
            .collect();
        fx.submit_all(txs);
        fx.mine_ok();
    }

    #[test]
    fn update_fans_out_per_bit_and_deletes_entry() {
        let (mut fx, channels) = three_channel_fixture();
        let states = vec![
            ChannelState::new(7, 3, 1), // stale: denied
            ChannelState::new(4, 6, 2), // fresh: paid
            ChannelState::new(2, 8, 3), // fresh: paid
        ];
        close_all(&mut fx, &channels, &states);
        assert_eq!(fx.tower_state().pending().unwrap().cids, channels);

        let update = fx.update_tx(vec![false, true, true]);
        let id = fx.chain.submit_tx(update).unwrap();
        fx.chain.mine_block();
        let receipt = fx
            .chain
            .receipts()
            .iter()
            .rev()
            .find(|r| r.tx_id == id)
            .unwrap()
            .clone();
        assert!(receipt.status.is_ok());

        // One payout sub-call per pending closure, in entry order.
        let payouts: Vec<_> = receipt
            .subcalls
            .iter()
            .filter(|s| s.method == "channel.payout")
            .collect();
        assert_eq!(payouts.len(), 3);
        assert_eq!(payouts[0].to, channels[0]);
        assert!(payouts.iter().all(|s| s.status.is_ok()));

        // Denied channel extended, confirmed channels settled.
        for (i, cid) in channels.iter().enumerate() {
            let Some(Contract::Channel(c)) = fx.chain.contract(cid) else { panic!() };
            if i == 0 {
                assert_eq!(c.flag, crate::contracts::channel::Flag::Dispute);
                assert_eq!(c.end, fx.chain.now() + 40);
            } else {
                assert_eq!(c.flag, crate::contracts::channel::Flag::Idle);
            }
        }

        // Entry deleted, counter advanced.
        assert_eq!(fx.tower_state().k, 1);
        assert!(fx.tower_state().entries.get(&0).is_none());
        assert!(fx.tower_state().pending().is_none());
    }

    #[test]
    fn update_rejects_non_owner_and_length_mismatch() {
        let (mut fx, channels) = three_channel_fixture();
        let states = vec![
            ChannelState::new(7, 3, 1),
            ChannelState::new(4, 6, 2),
            ChannelState::new(2, 8, 3),
        ];
        close_all(&mut fx, &channels, &states);

        let alice = fx.alice.clone();
        let tower = fx.tower;
        let tx = fx.tx(
            &alice,
            tower,
            0,
            Call::TowerUpdate { confs: ConfirmationSet::new(vec![true, true, true]) },
        );
        assert_eq!(fx.exec(tx), ExecStatus::Reverted(RevertReason::NotOwner));

        let update = fx.update_tx(vec![true]);
        assert_eq!(fx.exec(update), ExecStatus::Reverted(RevertReason::LengthMismatch));
        // Nothing was consumed by the failed attempts.
        assert_eq!(fx.tower_state().pending().unwrap().len(), 3);
        assert_eq!(fx.tower_state().k, 0);
    }

    #[test]
    fn empty_update_only_advances_counter() {
        let mut fx = Fixture::new(8, 40);
        let update = fx.update_tx(vec![]);
        assert_eq!(fx.exec(update), ExecStatus::Ok);
        assert_eq!(fx.tower_state().k, 1);
        assert_eq!(fx.channel_state().flag, crate::contracts::channel::Flag::Ok);
    }

    #[test]
    fn respond_isolates_failing_channels() {
        let (mut fx, channels) = three_channel_fixture();
        // The first closure claims more than the channel holds; its
        // payout reverts while the others settle.
        let states = vec![
            ChannelState::new(100, 100, 1),
            ChannelState::new(4, 6, 2),
            ChannelState::new(2, 8, 3),
        ];
        close_all(&mut fx, &channels, &states);

        let update = fx.update_tx(vec![true, true, true]);
        let id = fx.chain.submit_tx(update).unwrap();
        fx.chain.mine_block();
        let receipt = fx
            .chain
            .receipts()
            .iter()
            .rev()
            .find(|r| r.tx_id == id)
            .unwrap()
            .clone();
        assert!(receipt.status.is_ok(), "update itself must not abort");
        let payouts: Vec<_> = receipt
            .subcalls
            .iter()
            .filter(|s| s.method == "channel.payout")
            .collect();
        assert_eq!(payouts[0].status, Err(RevertReason::InsufficientFunds));
        assert!(payouts[1].status.is_ok());
        assert!(payouts[2].status.is_ok());

        let Some(Contract::Channel(c0)) = fx.chain.contract(&channels[0]) else { panic!() };
        assert_eq!(c0.flag, crate::contracts::channel::Flag::Dispute);
        assert_eq!(c0.held, 10, "failed payout must not move funds");
        let Some(Contract::Channel(c1)) = fx.chain.contract(&channels[1]) else { panic!() };
        assert_eq!(c1.flag, crate::contracts::channel::Flag::Idle);
        // Entry still deleted: the failed channel waits for its parties.
        assert!(fx.tower_state().pending().is_none());
    }

    #[test]
    fn bitmap_packing_matches_spec_rule() {
        let confs = ConfirmationSet::new(vec![false, true, true]);
        assert_eq!(confs.to_bytes(), vec![0x00, 0x03, 0x60]);
        assert_eq!(confs.bitmap_len(), 1);

        let all_set = ConfirmationSet::new(vec![true; 8]);
        assert_eq!(all_set.to_bytes(), vec![0x00, 0x08, 0xFF]);

        let empty = ConfirmationSet::new(vec![]);
        assert_eq!(empty.to_bytes(), vec![0x00, 0x00]);
        assert_eq!(empty.bitmap_len(), 0);
    }

    #[test]
    fn bitmap_round_trip_and_economy() {
        for m in [1usize, 10, 100, 1000] {
            let bits: Vec<bool> = (0..m).map(|j| j % 3 == 0).collect();
            let confs = ConfirmationSet::new(bits);
            let bytes = confs.to_bytes();
            assert_eq!(bytes.len(), 2 + m.div_ceil(8));
            assert_eq!(ConfirmationSet::from_bytes(&bytes).unwrap(), confs);
        }
        assert_eq!(ConfirmationSet::new(vec![true; 1000]).bitmap_len(), 125);
    }

    #[test]
    fn bitmap_rejects_bad_lengths() {
        assert!(ConfirmationSet::from_bytes(&[]).is_err());
        // Claims 9 bits but carries only one byte of bitmap.
        assert!(ConfirmationSet::from_bytes(&[0x00, 0x09, 0xFF]).is_err());
    }
}
