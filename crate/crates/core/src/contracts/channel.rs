//! The per-channel contract: registration and deposits, closure with a
//! tolerance deadline, disputes, watchtower-gated payout, and the
//! challenge path that claws back (part of) the watchtower's deposit
//! when it closed wrongly or responded late.

use super::{call_contract, Call, Caller, ExecEnv, RevertReason};
use crate::chain::{Event, EventKind};
use crate::crypto::{verify, PublicKey, Signature};
use crate::types::{hash_commit, ChannelState, Cid, Fraction, Nonce};
use crate::wire::{payment_sign_payload, receipt_sign_payload};

/// Channel life-cycle flag. `Idle` is the unset state the contract starts
/// in and returns to after payout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    Idle,
    Ok,
    Dispute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelContract {
    pub flag: Flag,
    pub pk_a: Option<PublicKey>,
    pub pk_b: Option<PublicKey>,
    /// Recorded deposits of each party.
    pub bal_a: u128,
    pub bal_b: u128,
    /// Actual token balance of the contract.
    pub held: u128,
    pub wt_pk: Option<PublicKey>,
    pub tower: Option<Cid>,
    /// Currently accepted closing state `s`.
    pub accepted: Option<ChannelState>,
    /// Tolerance deadline: the watchtower loses nothing if it responds
    /// by this height.
    pub ddl: u64,
    /// Fail-safe deadline: no party payout before this height.
    pub end: u64,
    pub is_rspd: bool,
    /// Fraction of the watchtower deposit claimable via challenge.
    pub perc: Fraction,
    /// Tolerance timeout `t` in blocks, fixed at deployment.
    pub tolerance: u64,
    /// Fail-safe timeout `T` in blocks, fixed at deployment.
    pub fail_safe: u64,
}

impl ChannelContract {
    pub fn new(tolerance: u64, fail_safe: u64) -> ChannelContract {
        ChannelContract {
            flag: Flag::Idle,
            pk_a: None,
            pk_b: None,
            bal_a: 0,
            bal_b: 0,
            held: 0,
            wt_pk: None,
            tower: None,
            accepted: None,
            ddl: 0,
            end: 0,
            is_rspd: false,
            perc: Fraction::ZERO,
            tolerance,
            fail_safe,
        }
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
            Call::ChannelSetup { tower, wt_pk } => self.setup(env, caller, value, *tower, *wt_pk),
            Call::ChannelDeposit => self.deposit(caller, value),
            Call::ChannelClose { state, r, sig_a, sig_b } => {
                self.close(env, self_addr, state, r, sig_a, sig_b)
            }
            Call::ChannelDispute { state, r, sig_a, sig_b } => {
                self.dispute(env, self_addr, state, r, sig_a, sig_b)
            }
            Call::ChannelPayout { state, is_pay } => {
                self.payout(env, caller, state, *is_pay)
            }
            Call::ChannelChallenge { state, r, sig_wt } => {
                self.challenge(env, caller, self_addr, state, r, sig_wt)
            }
            _ => Err(RevertReason::MethodMismatch),
        }
    }

    fn setup(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        value: u128,
        tower: Cid,
        wt_pk: PublicKey,
    ) -> Result<(), RevertReason> {
        if self.flag != Flag::Idle {
            return Err(RevertReason::FlagNotIdle);
        }
        let Caller::Account(party) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        if !matches!(env.store.contracts.get(&tower), Some(super::Contract::Tower(_))) {
            return Err(RevertReason::UnknownContract);
        }
        self.pk_a = Some(party);
        self.bal_a = value;
        self.pk_b = None;
        self.bal_b = 0;
        self.wt_pk = Some(wt_pk);
        self.tower = Some(tower);
        self.accepted = None;
        self.ddl = 0;
        self.end = 0;
        self.is_rspd = false;
        self.perc = Fraction::ZERO;
        self.flag = Flag::Ok;
        Ok(())
    }

    fn deposit(&mut self, caller: Caller, value: u128) -> Result<(), RevertReason> {
        if self.flag != Flag::Ok {
            return Err(RevertReason::FlagNotOk);
        }
        let Caller::Account(party) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        self.pk_b = Some(party);
        self.bal_b = value;
        Ok(())
    }

    /// Both registered parties must have signed `tag || cid || idx || H(s || r)`.
    /// Before the counter-party deposits only `pk_a` is registered, which
    /// realizes the failed-setup escape: the opener can recover funds with
    /// her own signature alone while nothing else is at stake.
    fn verify_party_sigs(
        &self,
        self_addr: Cid,
        state: &ChannelState,
        r: &Nonce,
        sig_a: &Signature,
        sig_b: &Signature,
    ) -> Result<(), RevertReason> {
        let h = hash_commit(state, r);
        let payload = payment_sign_payload(&self_addr, state.idx, &h);
        let pk_a = self.pk_a.ok_or(RevertReason::MissingParty)?;
        if !verify(&pk_a, &payload, sig_a) {
            return Err(RevertReason::BadSignature);
        }
        if let Some(pk_b) = self.pk_b {
            if !verify(&pk_b, &payload, sig_b) {
                return Err(RevertReason::BadSignature);
            }
        }
        Ok(())
    }

    fn close(
        &mut self,
        env: &mut ExecEnv<'_>,
        self_addr: Cid,
        state: &ChannelState,
        r: &Nonce,
        sig_a: &Signature,
        sig_b: &Signature,
    ) -> Result<(), RevertReason> {
        if self.flag != Flag::Ok {
            return Err(RevertReason::FlagNotOk);
        }
        self.verify_party_sigs(self_addr, state, r, sig_a, sig_b)?;
        self.flag = Flag::Dispute;
        self.accepted = Some(*state);
        self.ddl = env.now + self.tolerance;
        self.end = self.ddl + self.fail_safe;
        self.is_rspd = false;
        self.perc = Fraction::ZERO;
        let tower = self.tower.ok_or(RevertReason::NoWatchtower)?;
        call_contract(
            env,
            Caller::Contract(self_addr),
            tower,
            &Call::TowerClose { cid: self_addr, state: *state },
            0,
        )?;
        env.events.push(Event {
            kind: EventKind::Closure,
            cid: self_addr,
            state: *state,
            r: *r,
            height: env.now,
            index: 0,
        });
        Ok(())
    }

    fn dispute(
        &mut self,
        env: &mut ExecEnv<'_>,
        self_addr: Cid,
        state: &ChannelState,
        r: &Nonce,
        sig_a: &Signature,
        sig_b: &Signature,
    ) -> Result<(), RevertReason> {
        // All guards run before any mutation.
        self.verify_party_sigs(self_addr, state, r, sig_a, sig_b)?;
        if self.flag != Flag::Dispute {
            return Err(RevertReason::FlagNotDispute);
        }
        if env.now >= self.end {
            return Err(RevertReason::PastEnd);
        }
        let accepted = self.accepted.ok_or(RevertReason::NoClosure)?;
        if state.idx <= accepted.idx {
            return Err(RevertReason::StaleState);
        }
        self.accepted = Some(*state);
        let tower = self.tower.ok_or(RevertReason::NoWatchtower)?;
        call_contract(
            env,
            Caller::Contract(self_addr),
            tower,
            &Call::TowerClose { cid: self_addr, state: *state },
            0,
        )?;
        env.events.push(Event {
            kind: EventKind::Dispute,
            cid: self_addr,
            state: *state,
            r: *r,
            height: env.now,
            index: 0,
        });
        Ok(())
    }

    fn payout(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        state: &ChannelState,
        is_pay: bool,
    ) -> Result<(), RevertReason> {
        if self.flag != Flag::Dispute {
            return Err(RevertReason::FlagNotDispute);
        }
        match caller {
            Caller::Contract(addr) if Some(addr) == self.tower => {
                if env.now > self.ddl && !self.is_rspd {
                    self.perc = Fraction::new(
                        u128::from(env.now - self.ddl),
                        u128::from(self.fail_safe),
                    )
                    .min_one();
                }
                self.is_rspd = true;
                if is_pay {
                    self.transfer_out(env, state)?;
                } else {
                    // Fail-safe extension: the watchtower denied this state.
                    self.end = env.now + self.fail_safe;
                }
                Ok(())
            }
            Caller::Account(pk) if self.is_party(&pk) => {
                if env.now <= self.end {
                    return Err(RevertReason::TooEarly);
                }
                self.transfer_out(env, state)
            }
            _ => Err(RevertReason::Unauthorized),
        }
    }

    fn challenge(
        &mut self,
        env: &mut ExecEnv<'_>,
        caller: Caller,
        self_addr: Cid,
        state: &ChannelState,
        r: &Nonce,
        sig_wt: &Signature,
    ) -> Result<(), RevertReason> {
        let Caller::Account(claimant) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        let wt_pk = self.wt_pk.ok_or(RevertReason::NoWatchtower)?;
        let h = hash_commit(state, r);
        let payload = receipt_sign_payload(&self_addr, state.idx, &h);
        if !verify(&wt_pk, &payload, sig_wt) {
            return Err(RevertReason::BadSignature);
        }
        if env.now <= self.end {
            return Err(RevertReason::TooEarly);
        }
        // A challenge is only meaningful against a closure episode.
        let accepted = self.accepted.ok_or(RevertReason::NoClosure)?;
        let tower = self.tower.ok_or(RevertReason::NoWatchtower)?;
        let closed_wrongly = self.flag == Flag::Idle && state.idx > accepted.idx;
        if closed_wrongly || !self.is_rspd {
            call_contract(
                env,
                Caller::Contract(self_addr),
                tower,
                &Call::TowerWithdraw {
                    cid: self_addr,
                    victim: claimant,
                    percentage: Fraction::ONE,
                },
                0,
            )?;
        }
        if !self.perc.is_zero() {
            call_contract(
                env,
                Caller::Contract(self_addr),
                tower,
                &Call::TowerWithdraw {
                    cid: self_addr,
                    victim: claimant,
                    percentage: self.perc,
                },
                0,
            )?;
        }
        Ok(())
    }

    fn is_party(&self, pk: &PublicKey) -> bool {
        self.pk_a == Some(*pk) || self.pk_b == Some(*pk)
    }

    /// Release the accepted state's balances and return to the idle flag.
    fn transfer_out(
        &mut self,
        env: &mut ExecEnv<'_>,
        state: &ChannelState,
    ) -> Result<(), RevertReason> {
        if self.accepted != Some(*state) {
            return Err(RevertReason::StateMismatch);
        }
        if self.bal_a + self.bal_b < state.total() || self.held < state.total() {
            return Err(RevertReason::InsufficientFunds);
        }
        if state.bal_a > 0 {
            let pk_a = self.pk_a.ok_or(RevertReason::MissingParty)?;
            env.store.credit(pk_a, state.bal_a);
        }
        if state.bal_b > 0 {
            let pk_b = self.pk_b.ok_or(RevertReason::MissingParty)?;
            env.store.credit(pk_b, state.bal_b);
        }
        self.held -= state.total();
        self.flag = Flag::Idle;
        self.accepted = Some(*state);
        Ok(())
    }
}
