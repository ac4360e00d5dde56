//! Adversary strategies injected into runs. Every strategy's actions are
//! expected to be either rejected outright (bad signatures, non-owner
//! updates) or punished by the contract rules (stale closes, silent
//! watchtowers); the safety tests assert exactly that.

use super::actors::MessageBus;
use super::config::AdversaryStrategy;
use crate::chain::{SimChain, Tx};
use crate::contracts::{Call, ConfirmationSet, Contract};
use crate::crypto::KeyPair;
use crate::types::{ChannelState, Cid};
use crate::wire::SUBMISSION_LEN;

pub struct Adversary {
    pub strategy: Option<AdversaryStrategy>,
    /// The adversary's own externally-owned account.
    kp: KeyPair,
    /// Key of the adversary-controlled channel party, when the strategy
    /// involves acting as one (stale closes).
    party_kp: Option<KeyPair>,
    tx_seq: u64,
    mitm_injected: bool,
    tamper_submitted: bool,
    stale_payout_attempted: bool,
}

impl Adversary {
    pub fn new(strategy: Option<AdversaryStrategy>, kp: KeyPair, party_kp: Option<KeyPair>) -> Adversary {
        Adversary {
            strategy,
            kp,
            party_kp,
            tx_seq: 0,
            mitm_injected: false,
            tamper_submitted: false,
            stale_payout_attempted: false,
        }
    }

    /// Run one round of adversarial behaviour. Returns transactions to
    /// queue plus trace notes.
    pub fn act(
        &mut self,
        chain: &SimChain,
        bus: &mut MessageBus,
        channel: Cid,
        tower: Cid,
        stale_state: Option<ChannelState>,
    ) -> (Vec<Tx>, Vec<String>) {
        let mut txs = Vec::new();
        let mut notes = Vec::new();
        match self.strategy {
            Some(AdversaryStrategy::ReplayMitm) if !self.mitm_injected => {
                // Replay an intercepted submission with a tampered
                // commitment; the co-signatures no longer cover it.
                if let Some(original) = bus
                    .party_to_wt_capture
                    .iter()
                    .rev()
                    .find(|m| m.len() == SUBMISSION_LEN)
                    .cloned()
                {
                    let mut tampered = original;
                    tampered[30] ^= 0xFF; // inside the commitment field
                    bus.send(
                        super::actors::Endpoint::PartyA,
                        super::actors::Endpoint::Watchtower,
                        tampered,
                    );
                    self.mitm_injected = true;
                    notes.push("adversary: injected tampered submission replay".to_string());
                }
            }
            Some(AdversaryStrategy::ConfsTamperer) if !self.tamper_submitted => {
                let pending = match chain.contract(&tower) {
                    Some(Contract::Tower(t)) => t.pending().map_or(0, |e| e.len()),
                    _ => 0,
                };
                if pending > 0 {
                    // Forge an all-approving confirmation set from a
                    // non-owner account.
                    let confs = ConfirmationSet::new(vec![true; pending]);
                    txs.push(Tx::signed(&self.kp, self.tx_seq, tower, 0, Call::TowerUpdate { confs }));
                    self.tx_seq += 1;
                    self.tamper_submitted = true;
                    notes.push("adversary: submitted forged confirmation set".to_string());
                }
            }
            Some(AdversaryStrategy::StaleCloser) if !self.stale_payout_attempted => {
                // Past the fail-safe deadline, try to cash out the stale
                // state. Rejected whenever the accepted state moved on.
                if let (Some(party_kp), Some(stale)) = (&self.party_kp, stale_state) {
                    if let Some(Contract::Channel(c)) = chain.contract(&channel) {
                        if c.flag == crate::contracts::channel::Flag::Dispute && chain.now() >= c.end
                        {
                            txs.push(Tx::signed(
                                party_kp,
                                u64::MAX - u64::from(u32::MAX) + self.tx_seq, // avoid seq clash with the actor
                                channel,
                                0,
                                Call::ChannelPayout { state: stale, is_pay: true },
                            ));
                            self.tx_seq += 1;
                            self.stale_payout_attempted = true;
                            notes.push(format!("adversary: attempted stale payout of {stale}"));
                        }
                    }
                }
            }
            _ => {}
        }
        (txs, notes)
    }

    /// True when the strategy has no further moves, for the runner's
    /// termination probe.
    pub fn done(&self, chain: &SimChain, channel: Cid) -> bool {
        match self.strategy {
            None | Some(AdversaryStrategy::SilentWt) => true,
            Some(AdversaryStrategy::ReplayMitm) => self.mitm_injected,
            Some(AdversaryStrategy::ConfsTamperer) => self.tamper_submitted,
            Some(AdversaryStrategy::StaleCloser) => {
                self.stale_payout_attempted
                    || match chain.contract(&channel) {
                        Some(Contract::Channel(c)) => {
                            c.flag == crate::contracts::channel::Flag::Idle
                        }
                        _ => false,
                    }
            }
        }
    }
}
