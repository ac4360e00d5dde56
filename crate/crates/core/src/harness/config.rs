//! Scenario configuration: everything a reproducible run needs, loaded
//! from JSON. Validation rejects configs that violate the protocol's
//! stated operating assumptions instead of silently producing losses.

use crate::types::Party;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Channel contract + tower contract + watchtower service.
    Watchtower,
    /// Assertion channel; no third party involved.
    ShortLived,
}

/// Block-count timeouts. Defaults convert the protocol's wall-clock
/// guidance (about an hour of tolerance, about a day of fail-safe) at
/// one block per 14 seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeouts {
    /// Tolerance timeout `t`.
    pub tolerance: u64,
    /// Fail-safe timeout `T`.
    pub fail_safe: u64,
    /// Fast-path payout delay for fresh assertions.
    pub t_fast: u64,
    /// Freshness limit `n` for assertion channels.
    pub freshness_limit: u64,
    /// Watchtower update period; must stay below `tolerance`.
    pub period: u64,
}

impl Default for Timeouts {
    fn default() -> Timeouts {
        Timeouts {
            tolerance: 256,
            fail_safe: 5760,
            t_fast: 2,
            freshness_limit: 4,
            period: 16,
        }
    }
}

/// One scripted off-chain transfer. `at_height` schedules the exchange
/// after that block is mined; omitted steps run as early as possible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentStep {
    pub from: Party,
    pub amount: u128,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_height: Option<u64>,
}

/// Which co-signed state the closer submits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloseWith {
    Latest,
    /// A historic state by transaction index; a stale close when it is
    /// not the latest.
    Index(u128),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloseStep {
    pub by: Party,
    pub with: CloseWith,
    pub at_height: u64,
}

/// Inclusive offline windows per actor, in block heights.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Availability {
    pub party_a: Vec<(u64, u64)>,
    pub party_b: Vec<(u64, u64)>,
    pub watchtower: Vec<(u64, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// The closer submits a stale state hoping the victim stays away.
    StaleCloser,
    /// Intercepts party-to-watchtower submissions and re-injects them
    /// with a tampered commitment.
    ReplayMitm,
    /// Submits a forged confirmation-set update from a non-owner account.
    ConfsTamperer,
    /// The watchtower stays silent past the tolerance deadline; the
    /// customer challenges afterwards.
    SilentWt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub timeouts: Timeouts,
    pub deposit_a: u128,
    pub deposit_b: u128,
    /// Customer deposit at the tower contract (watchtower mode).
    #[serde(default)]
    pub tower_deposit: u128,
    #[serde(default)]
    pub payments: Vec<PaymentStep>,
    pub close: CloseStep,
    #[serde(default)]
    pub availability: Availability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_path: Option<PathBuf>,
    /// Hard stop for the run loop; defaults to well past the worst-case
    /// finalization height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_blocks: Option<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("offline interval ({0}, {1}) is inverted")]
    BadInterval(u64, u64),
    #[error("payment {index} overdraws {party} (balance {balance}, amount {amount})")]
    Overdraft { index: usize, party: Party, balance: u128, amount: u128 },
    #[error("close references state index {0} outside the script")]
    BadCloseIndex(u128),
    #[error("watchtower period {period} must be positive and below tolerance {tolerance}")]
    BadPeriod { period: u64, tolerance: u64 },
    #[error("freshness limit must be at least 1")]
    BadFreshnessLimit,
    #[error("honest {0} has an offline window of {1} blocks, not below the fail-safe timeout {2}; parties must connect at least once per fail-safe window")]
    UnreachableParty(Party, u64, u64),
    #[error("payment heights must not decrease")]
    UnorderedPayments,
    #[error("close height {close} precedes the last scheduled payment at {payment}")]
    CloseBeforePayments { close: u64, payment: u64 },
}

impl ScenarioConfig {
    /// A watchtower-mode config with defaults; used as a base by tests
    /// and the fuzzers.
    pub fn watchtower_defaults(seed: u64, deposit_a: u128, deposit_b: u128) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            mode: Mode::Watchtower,
            timeouts: Timeouts::default(),
            deposit_a,
            deposit_b,
            tower_deposit: 100,
            payments: vec![],
            close: CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 4 },
            availability: Availability::default(),
            adversary: None,
            snapshot_path: None,
            max_blocks: None,
        }
    }

    pub fn capacity(&self) -> u128 {
        self.deposit_a + self.deposit_b
    }

    /// Replay the payment script and return every state's balances,
    /// index 0 being the initial deposits.
    pub fn scripted_balances(&self) -> Result<Vec<(u128, u128)>, ConfigError> {
        let mut balances = vec![(self.deposit_a, self.deposit_b)];
        let (mut bal_a, mut bal_b) = (self.deposit_a, self.deposit_b);
        for (index, step) in self.payments.iter().enumerate() {
            let from_balance = match step.from {
                Party::A => &mut bal_a,
                Party::B => &mut bal_b,
            };
            if *from_balance < step.amount {
                return Err(ConfigError::Overdraft {
                    index,
                    party: step.from,
                    balance: *from_balance,
                    amount: step.amount,
                });
            }
            *from_balance -= step.amount;
            match step.from {
                Party::A => bal_b += step.amount,
                Party::B => bal_a += step.amount,
            }
            balances.push((bal_a, bal_b));
        }
        Ok(balances)
    }

    /// The latest scripted transaction index.
    pub fn final_idx(&self) -> u128 {
        self.payments.len() as u128
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for &(from, until) in self
            .availability
            .party_a
            .iter()
            .chain(&self.availability.party_b)
            .chain(&self.availability.watchtower)
        {
            if from > until {
                return Err(ConfigError::BadInterval(from, until));
            }
        }
        self.scripted_balances()?;
        if let CloseWith::Index(idx) = self.close.with {
            if idx > self.final_idx() {
                return Err(ConfigError::BadCloseIndex(idx));
            }
        }
        if self.mode == Mode::Watchtower
            && (self.timeouts.period == 0 || self.timeouts.period >= self.timeouts.tolerance)
        {
            return Err(ConfigError::BadPeriod {
                period: self.timeouts.period,
                tolerance: self.timeouts.tolerance,
            });
        }
        if self.mode == Mode::ShortLived && self.timeouts.freshness_limit == 0 {
            return Err(ConfigError::BadFreshnessLimit);
        }
        // The protocol assumes honest parties connect at least once per
        // fail-safe window; configs breaking that assumption are invalid
        // rather than lossy. The adversary-controlled closer is exempt.
        let adversary_party = match self.adversary {
            Some(AdversaryStrategy::StaleCloser) => Some(self.close.by),
            _ => None,
        };
        for (party, windows) in [
            (Party::A, &self.availability.party_a),
            (Party::B, &self.availability.party_b),
        ] {
            if adversary_party == Some(party) {
                continue;
            }
            for &(from, until) in windows {
                let len = until - from + 1;
                if len >= self.timeouts.fail_safe {
                    return Err(ConfigError::UnreachableParty(party, len, self.timeouts.fail_safe));
                }
            }
        }
        let mut last = 0u64;
        for step in &self.payments {
            if let Some(h) = step.at_height {
                if h < last {
                    return Err(ConfigError::UnorderedPayments);
                }
                last = h;
            }
        }
        if self.close.at_height < last {
            return Err(ConfigError::CloseBeforePayments {
                close: self.close.at_height,
                payment: last,
            });
        }
        Ok(())
    }

    /// Worst-case run length: close, tolerance, two fail-safe windows
    /// (one extension), and slack for challenges.
    pub fn default_max_blocks(&self) -> u64 {
        self.close.at_height + self.timeouts.tolerance + 2 * self.timeouts.fail_safe + 16
    }
}
