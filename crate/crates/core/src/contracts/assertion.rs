//! Channel contract variant closed by short-lived assertions. No
//! watchtower: the contract itself checks the co-signed block-hash
//! anchor against its recent-hash window and routes the closure to a
//! fast or slow payout path.

use super::{Call, Caller, ExecEnv, RevertReason};
use crate::assertions::{freshness, Freshness, FreshnessPolicy};
use crate::chain::{Event, EventKind};
use crate::crypto::{verify, PublicKey};
use crate::types::{ChannelState, Cid, Nonce};
use crate::wire::AssertionMessage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssertFlag {
    Idle,
    Open,
    Closing {
        /// Fresh anchors take the fast path.
        fast: bool,
        /// First height at which payout may execute.
        deadline: u64,
        /// Fast-path replacements so far; the second one escalates to
        /// the slow timeout to stop griefing by alternating replacements.
        replacements: u8,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssertionChannel {
    pub flag: AssertFlag,
    pub pk_a: Option<PublicKey>,
    pub pk_b: Option<PublicKey>,
    pub bal_a: u128,
    pub bal_b: u128,
    pub held: u128,
    pub accepted: Option<ChannelState>,
    pub policy: FreshnessPolicy,
}

impl AssertionChannel {
    pub fn new(policy: FreshnessPolicy) -> AssertionChannel {
        AssertionChannel {
            flag: AssertFlag::Idle,
            pk_a: None,
            pk_b: None,
            bal_a: 0,
            bal_b: 0,
            held: 0,
            accepted: None,
            policy,
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
            Call::AssertSetup => self.setup(caller, value),
            Call::AssertDeposit => self.deposit(caller, value),
            Call::AssertClose { assertion } => self.close(env, self_addr, assertion),
            Call::AssertDispute { assertion } => self.dispute(env, self_addr, assertion),
            Call::AssertPayout => self.payout(env, caller),
            _ => Err(RevertReason::MethodMismatch),
        }
    }

    fn setup(&mut self, caller: Caller, value: u128) -> Result<(), RevertReason> {
        if self.flag != AssertFlag::Idle {
            return Err(RevertReason::FlagNotIdle);
        }
        let Caller::Account(party) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        self.pk_a = Some(party);
        self.bal_a = value;
        self.pk_b = None;
        self.bal_b = 0;
        self.accepted = None;
        self.flag = AssertFlag::Open;
        Ok(())
    }

    fn deposit(&mut self, caller: Caller, value: u128) -> Result<(), RevertReason> {
        if self.flag != AssertFlag::Open {
            return Err(RevertReason::FlagNotOk);
        }
        let Caller::Account(party) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        self.pk_b = Some(party);
        self.bal_b = value;
        Ok(())
    }

    fn verify_sigs(&self, self_addr: Cid, msg: &AssertionMessage) -> Result<(), RevertReason> {
        if msg.cid != self_addr {
            return Err(RevertReason::WrongChannel);
        }
        let payload = msg.sign_payload();
        let pk_a = self.pk_a.ok_or(RevertReason::MissingParty)?;
        if !verify(&pk_a, &payload, &msg.sig_a) {
            return Err(RevertReason::BadSignature);
        }
        if let Some(pk_b) = self.pk_b {
            if !verify(&pk_b, &payload, &msg.sig_b) {
                return Err(RevertReason::BadSignature);
            }
        }
        Ok(())
    }

    fn close(
        &mut self,
        env: &mut ExecEnv<'_>,
        self_addr: Cid,
        msg: &AssertionMessage,
    ) -> Result<(), RevertReason> {
        if self.flag != AssertFlag::Open {
            return Err(RevertReason::FlagNotOk);
        }
        self.verify_sigs(self_addr, msg)?;
        let fresh = freshness(env.block_hashes, &msg.anchor, self.policy.freshness_limit)
            == Freshness::Fresh;
        self.accepted = Some(msg.state);
        self.flag = AssertFlag::Closing {
            fast: fresh,
            deadline: env.now + if fresh { self.policy.t_fast } else { self.policy.fail_safe },
            replacements: 0,
        };
        env.events.push(Event {
            kind: EventKind::Closure,
            cid: self_addr,
            state: msg.state,
            r: Nonce::ZERO,
            height: env.now,
            index: 0,
        });
        Ok(())
    }

    fn dispute(
        &mut self,
        env: &mut ExecEnv<'_>,
        self_addr: Cid,
        msg: &AssertionMessage,
    ) -> Result<(), RevertReason> {
        self.verify_sigs(self_addr, msg)?;
        let AssertFlag::Closing { fast, deadline, replacements } = self.flag else {
            return Err(RevertReason::FlagNotDispute);
        };
        if env.now >= deadline {
            return Err(RevertReason::PastEnd);
        }
        let accepted = self.accepted.ok_or(RevertReason::NoClosure)?;
        if msg.state.idx <= accepted.idx {
            return Err(RevertReason::StaleState);
        }
        self.accepted = Some(msg.state);
        self.flag = if fast {
            if replacements == 0 {
                // One fast restart is allowed; after that the slow
                // timeout takes over.
                AssertFlag::Closing {
                    fast: true,
                    deadline: env.now + self.policy.t_fast,
                    replacements: 1,
                }
            } else {
                AssertFlag::Closing {
                    fast: false,
                    deadline: env.now + self.policy.fail_safe,
                    replacements: replacements.saturating_add(1),
                }
            }
        } else {
            AssertFlag::Closing { fast, deadline, replacements }
        };
        env.events.push(Event {
            kind: EventKind::Dispute,
            cid: self_addr,
            state: msg.state,
            r: Nonce::ZERO,
            height: env.now,
            index: 0,
        });
        Ok(())
    }

    fn payout(&mut self, env: &mut ExecEnv<'_>, caller: Caller) -> Result<(), RevertReason> {
        let AssertFlag::Closing { deadline, .. } = self.flag else {
            return Err(RevertReason::FlagNotDispute);
        };
        let Caller::Account(pk) = caller else {
            return Err(RevertReason::Unauthorized);
        };
        if self.pk_a != Some(pk) && self.pk_b != Some(pk) {
            return Err(RevertReason::Unauthorized);
        }
        if env.now < deadline {
            return Err(RevertReason::TooEarly);
        }
        let state = self.accepted.ok_or(RevertReason::NoClosure)?;
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
        self.flag = AssertFlag::Idle;
        Ok(())
    }
}
