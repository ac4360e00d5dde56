//! The scenario runner: deterministic, round-based execution. Each round
//! pumps off-chain messages to quiescence, lets the watchtower and the
//! parties submit transactions, runs the adversary, then mines exactly
//! one block and records it. All randomness flows from the scenario
//! seed, so a config replays to a byte-identical trace.

use super::actors::{AssertionPartyActor, Endpoint, MessageBus, PartyActor};
use super::adversary::Adversary;
use super::config::{AdversaryStrategy, CloseWith, ConfigError, Mode, ScenarioConfig};
use super::metrics::{BlockRecord, RunMetrics, RunTrace};
use crate::assertions::{counter_sign_assertion, sign_assertion, FreshnessPolicy};
use crate::chain::{EventKind, SimChain};
use crate::contracts::assertion::AssertFlag;
use crate::contracts::channel::Flag;
use crate::contracts::{Call, Contract};
use crate::crypto::{Digest, KeyPair};
use crate::protocol::{initial_signatures, PartyLedger};
use crate::types::{ChannelState, Cid, Nonce, Party};
use crate::watchtower::WatchtowerService;
use crate::wire::{WatchtowerSubmission, SUBMISSION_LEN};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ConfigError),
    #[error("scenario setup failed: {0}")]
    Setup(String),
}

/// Execute a scenario to completion and return its trace.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunTrace, ScenarioError> {
    config.validate()?;
    match config.mode {
        Mode::Watchtower => WatchtowerRun::new(config)?.run(),
        Mode::ShortLived => ShortLivedRun::new(config)?.run(),
    }
}

fn sub_rng(master: &mut ChaCha20Rng) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    master.fill_bytes(&mut seed);
    ChaCha20Rng::from_seed(seed)
}

/// Shared per-run trace accounting.
struct Recorder {
    blocks: Vec<BlockRecord>,
    notes: Vec<String>,
    violations: Vec<String>,
    initial_tokens: u128,
    events_seen: usize,
    receipts_seen: usize,
}

impl Recorder {
    fn new(chain: &SimChain) -> Recorder {
        Recorder {
            blocks: vec![],
            notes: vec![],
            violations: vec![],
            initial_tokens: chain.total_tokens(),
            events_seen: 0,
            receipts_seen: 0,
        }
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn mine(&mut self, chain: &mut SimChain) {
        let block = chain.mine_block().clone();
        let events = chain.events()[self.events_seen..].to_vec();
        self.events_seen = chain.events().len();
        let receipts = chain.receipts()[self.receipts_seen..].to_vec();
        self.receipts_seen = chain.receipts().len();
        self.blocks.push(BlockRecord {
            height: block.height,
            hash: block.hash,
            events,
            receipts,
            actions: std::mem::take(&mut self.notes),
        });
        if chain.total_tokens() != self.initial_tokens {
            self.violations.push(format!(
                "conservation violated at height {}: {} tokens, expected {}",
                block.height,
                chain.total_tokens(),
                self.initial_tokens
            ));
        }
    }
}

// ---------------------------------------------------------------------
// Watchtower mode
// ---------------------------------------------------------------------

struct WatchtowerRun {
    config: ScenarioConfig,
    chain: SimChain,
    bus: MessageBus,
    actor_a: PartyActor,
    actor_b: PartyActor,
    service: WatchtowerService,
    adversary: Adversary,
    channel: Cid,
    tower: Cid,
    recorder: Recorder,
    metrics: RunMetrics,
    ingest_rejections: u64,
    next_payment: usize,
    close_submitted: bool,
    prev_flag: Flag,
    update_bitmaps: BTreeMap<Digest, usize>,
    service_was_offline: bool,
    stale_close_state: Option<ChannelState>,
}

impl WatchtowerRun {
    fn new(config: &ScenarioConfig) -> Result<WatchtowerRun, ScenarioError> {
        let mut master = ChaCha20Rng::seed_from_u64(config.seed);
        let kp_a = KeyPair::generate(&mut master);
        let kp_b = KeyPair::generate(&mut master);
        let kp_wt = KeyPair::generate(&mut master);
        let kp_adv = KeyPair::generate(&mut master);
        let rng_a = sub_rng(&mut master);
        let rng_b = sub_rng(&mut master);
        let r0 = Nonce::random(&mut master);

        let mut chain = SimChain::new();
        chain.fund_account(kp_a.public(), config.deposit_a);
        chain.fund_account(kp_b.public(), config.deposit_b + config.tower_deposit);
        let tower = chain.deploy(
            "tower",
            Contract::Tower(crate::contracts::TowerContract::new(kp_wt.public())),
        );
        let channel = chain.deploy(
            "channel",
            Contract::Channel(crate::contracts::ChannelContract::new(
                config.timeouts.tolerance,
                config.timeouts.fail_safe,
            )),
        );

        let s0 = ChannelState::new(config.deposit_a, config.deposit_b, 0);
        let (sig_a0, sig_b0) = initial_signatures(&kp_a, &kp_b, &channel, &s0, &r0);
        let ledger_a = PartyLedger::open(channel, Party::A, s0, r0, sig_a0, sig_b0);
        let ledger_b = PartyLedger::open(channel, Party::B, s0, r0, sig_b0, sig_a0);

        let mut actor_a = PartyActor::new(
            Party::A,
            kp_a.clone(),
            kp_b.public(),
            kp_wt.public(),
            channel,
            ledger_a,
            false,
            config.availability.party_a.clone(),
            rng_a,
        );
        let mut actor_b = PartyActor::new(
            Party::B,
            kp_b.clone(),
            kp_a.public(),
            kp_wt.public(),
            channel,
            ledger_b,
            true,
            config.availability.party_b.clone(),
            rng_b,
        );

        let adversary_party = match config.adversary {
            Some(AdversaryStrategy::StaleCloser) => Some(config.close.by),
            _ => None,
        };
        if adversary_party == Some(Party::A) {
            actor_a.passive = true;
        }
        if adversary_party == Some(Party::B) {
            actor_b.passive = true;
        }
        let party_kp = adversary_party.map(|p| match p {
            Party::A => kp_a.clone(),
            Party::B => kp_b.clone(),
        });

        let mut service = WatchtowerService::new(kp_wt, tower, config.timeouts.period);
        let mut wt_windows = config.availability.watchtower.clone();
        if config.adversary == Some(AdversaryStrategy::SilentWt) && wt_windows.is_empty() {
            // Stay silent until a response would land exactly half a
            // fail-safe window past the tolerance deadline.
            let close_block = config.close.at_height + 1;
            let ddl = close_block + config.timeouts.tolerance;
            let response = ddl + config.timeouts.fail_safe / 2;
            wt_windows = vec![(config.close.at_height, response.saturating_sub(2))];
        }
        service.set_offline_windows(wt_windows);
        if let Some(path) = &config.snapshot_path {
            service
                .set_snapshot_path(path.clone())
                .map_err(|e| ScenarioError::Setup(format!("snapshot: {e}")))?;
        }

        let stale_close_state = match config.close.with {
            CloseWith::Index(idx) => {
                let balances = config.scripted_balances().expect("validated");
                let (bal_a, bal_b) = balances[idx as usize];
                Some(ChannelState::new(bal_a, bal_b, idx))
            }
            CloseWith::Latest => None,
        };

        Ok(WatchtowerRun {
            config: config.clone(),
            recorder: Recorder::new(&chain),
            chain,
            bus: MessageBus::default(),
            actor_a,
            actor_b,
            service,
            adversary: Adversary::new(config.adversary, kp_adv, party_kp),
            channel,
            tower,
            metrics: RunMetrics::default(),
            ingest_rejections: 0,
            next_payment: 0,
            close_submitted: false,
            prev_flag: Flag::Idle,
            update_bitmaps: BTreeMap::new(),
            service_was_offline: false,
            stale_close_state,
        })
    }

    fn setup_on_chain(&mut self) -> Result<(), ScenarioError> {
        let setup = self.actor_a.next_tx(
            self.channel,
            self.config.deposit_a,
            Call::ChannelSetup { tower: self.tower, wt_pk: self.service.public_key() },
        );
        let deposit = self
            .actor_b
            .next_tx(self.channel, self.config.deposit_b, Call::ChannelDeposit);
        let protect = self.actor_b.next_tx(
            self.tower,
            self.config.tower_deposit,
            Call::TowerDeposit { cid: self.channel },
        );
        for tx in [setup, deposit, protect] {
            self.chain
                .submit_tx(tx)
                .map_err(|e| ScenarioError::Setup(e.to_string()))?;
        }
        self.recorder.note("setup: channel and tower deposits submitted".to_string());
        self.recorder.mine(&mut self.chain);
        if let Some(bad) = self.chain.receipts().iter().find(|r| !r.status.is_ok()) {
            return Err(ScenarioError::Setup(format!(
                "setup transaction {} reverted: {:?}",
                bad.method, bad.status
            )));
        }

        if self.config.tower_deposit > 0 {
            self.service
                .register_channel(
                    &self.chain,
                    self.channel,
                    self.actor_a.kp.public(),
                    self.actor_b.kp.public(),
                )
                .map_err(|e| ScenarioError::Setup(e.to_string()))?;
            // The customer forwards the initial state so an immediate
            // closure is confirmable.
            let signed = self.actor_b.ledger.current_signed();
            let submission = WatchtowerSubmission {
                cid: self.channel,
                h_s: crate::types::hash_commit(&signed.state, &signed.r),
                idx: signed.state.idx,
                sig_a: signed.sig_a,
                sig_b: signed.sig_b,
            };
            self.bus.send(
                Endpoint::PartyB,
                Endpoint::Watchtower,
                submission.encode().to_vec(),
            );
            self.recorder.note("setup: channel registered with watchtower".to_string());
        }
        Ok(())
    }

    fn pump(&mut self) {
        let now = self.chain.now();
        self.actor_a.observe_closing(&self.chain);
        self.actor_b.observe_closing(&self.chain);
        loop {
            let mut progressed = false;
            for role in [Party::A, Party::B] {
                let actor = match role {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                if !actor.is_online(now) {
                    continue;
                }
                let ep = actor.endpoint();
                for src in self.bus.pending_sources(ep) {
                    while let Some(bytes) = self.bus.recv(src, ep) {
                        progressed = true;
                        let out = actor.handle_message(&bytes);
                        if let Some(m) = out.to_peer {
                            self.bus.send(ep, Endpoint::of(role.other()), m);
                        }
                        if let Some(m) = out.to_wt {
                            self.bus.send(ep, Endpoint::Watchtower, m);
                        }
                        if let Some(n) = out.note {
                            self.recorder.note(n);
                        }
                    }
                }
            }
            if !self.service.is_offline(now) {
                self.service.observe(&self.chain);
                for src in [Endpoint::PartyA, Endpoint::PartyB] {
                    while let Some(bytes) = self.bus.recv(src, Endpoint::Watchtower) {
                        progressed = true;
                        if bytes.len() != SUBMISSION_LEN {
                            self.ingest_rejections += 1;
                            self.recorder.note(format!(
                                "wt: dropped {}-byte message",
                                bytes.len()
                            ));
                            continue;
                        }
                        match WatchtowerSubmission::decode(&bytes) {
                            Ok(sub) => match self.service.ingest(&sub) {
                                Ok(receipt) => {
                                    let enc = receipt.encode().to_vec();
                                    self.bus.send(Endpoint::Watchtower, Endpoint::PartyA, enc.clone());
                                    self.bus.send(Endpoint::Watchtower, Endpoint::PartyB, enc);
                                    self.recorder.note(format!("wt: issued receipt idx {}", receipt.idx));
                                }
                                Err(err) => {
                                    self.ingest_rejections += 1;
                                    self.recorder.note(format!("wt: rejected submission ({err})"));
                                }
                            },
                            Err(err) => {
                                self.ingest_rejections += 1;
                                self.recorder.note(format!("wt: undecodable submission ({err})"));
                            }
                        }
                    }
                }
            } else {
                self.service_was_offline = true;
            }
            if !progressed {
                break;
            }
        }
    }

    fn start_due_payments(&mut self) {
        loop {
            self.pump();
            let now = self.chain.now();
            let Some(step) = self.config.payments.get(self.next_payment).copied() else {
                return;
            };
            if step.at_height.unwrap_or(0) > now {
                return;
            }
            let sender = match step.from {
                Party::A => &mut self.actor_a,
                Party::B => &mut self.actor_b,
            };
            if !sender.is_online(now) {
                return;
            }
            let from = sender.endpoint();
            match sender.start_payment(step.amount) {
                super::actors::PaymentStart::Started(bytes) => {
                    self.bus.send(from, Endpoint::of(step.from.other()), bytes);
                    self.recorder.note(format!(
                        "{}: proposed payment of {} (step {})",
                        step.from, step.amount, self.next_payment
                    ));
                    self.next_payment += 1;
                }
                super::actors::PaymentStart::Busy => return,
                super::actors::PaymentStart::Refused(reason) => {
                    self.recorder.note(format!(
                        "{}: skipped payment step {} ({reason})",
                        step.from, self.next_payment
                    ));
                    self.next_payment += 1;
                }
            }
        }
    }

    fn channel_flag(&self) -> Flag {
        match self.chain.contract(&self.channel) {
            Some(Contract::Channel(c)) => c.flag,
            _ => Flag::Idle,
        }
    }

    fn channel_contract(&self) -> Option<&crate::contracts::ChannelContract> {
        match self.chain.contract(&self.channel) {
            Some(Contract::Channel(c)) => Some(c),
            _ => None,
        }
    }

    fn run(mut self) -> Result<RunTrace, ScenarioError> {
        self.setup_on_chain()?;
        let max_blocks = self
            .config
            .max_blocks
            .unwrap_or_else(|| self.config.default_max_blocks());
        let customer_pk = self.actor_b.kp.public();

        while self.chain.now() < max_blocks {
            let now = self.chain.now();
            self.start_due_payments();
            self.pump();
            self.check_receipt_completeness();

            // Watchtower first: an update in flight lands before any
            // dispute submitted this round, so a superseded decision is
            // corrected through a fresh pending entry next period.
            if let Some(tx) = self.service.tick(&self.chain) {
                if let Call::TowerUpdate { confs } = &tx.call {
                    self.update_bitmaps.insert(tx.id(), confs.bitmap_len());
                }
                self.recorder.note("wt: submitted confirmation-set update".to_string());
                let _ = self.chain.submit_tx(tx);
            }

            if !self.close_submitted && now >= self.config.close.at_height {
                let closer = match self.config.close.by {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                if closer.is_online(now) {
                    let with_idx = match self.config.close.with {
                        CloseWith::Latest => None,
                        CloseWith::Index(idx) => Some(idx),
                    };
                    let tx = closer.close_tx(with_idx);
                    let _ = self.chain.submit_tx(tx);
                    self.recorder.note(format!(
                        "{}: submitted close ({:?})",
                        self.config.close.by, self.config.close.with
                    ));
                    self.close_submitted = true;
                }
            }

            for role in [Party::A, Party::B] {
                let actor = match role {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                let (txs, notes) = actor.protect(&self.chain);
                for tx in txs {
                    let _ = self.chain.submit_tx(tx);
                }
                for note in notes {
                    self.recorder.note(note);
                }
            }

            let (adv_txs, adv_notes) = self.adversary.act(
                &self.chain,
                &mut self.bus,
                self.channel,
                self.tower,
                self.stale_close_state,
            );
            for tx in adv_txs {
                let _ = self.chain.submit_tx(tx);
            }
            for note in adv_notes {
                self.recorder.note(note);
            }

            let customer_before = self.chain.balance_of(&customer_pk);
            self.recorder.mine(&mut self.chain);
            self.collect_block_metrics(customer_before, customer_pk);

            if self.finished() {
                break;
            }
        }

        self.finish();
        Ok(RunTrace {
            blocks: std::mem::take(&mut self.recorder.blocks),
            metrics: self.metrics,
            violations: self.recorder.violations,
        })
    }

    fn check_receipt_completeness(&mut self) {
        // Only checkable when nothing is still in flight and the
        // watchtower has been reachable the whole run.
        let now = self.chain.now();
        if self.service_was_offline
            || self.close_submitted
            || !self.bus.all_empty()
            || !self.actor_a.is_online(now)
            || !self.actor_b.is_online(now)
        {
            return;
        }
        for actor in [&self.actor_a, &self.actor_b] {
            let idx = actor.ledger.state().idx;
            let held = actor.ledger.latest_receipt().map(|r| r.idx);
            if held != Some(idx) {
                self.recorder.violations.push(format!(
                    "receipt completeness violated for {} at height {}: ledger idx {}, receipt {:?}",
                    actor.role, now, idx, held
                ));
            }
        }
    }

    fn collect_block_metrics(&mut self, customer_before: u128, customer_pk: crate::crypto::PublicKey) {
        let now = self.chain.now();
        if self.metrics.close_height.is_none() {
            if let Some(event) = self
                .chain
                .events()
                .iter()
                .find(|e| e.kind == EventKind::Closure && e.cid == self.channel)
            {
                self.metrics.close_height = Some(event.height);
            }
        }
        let flag = self.channel_flag();
        if self.prev_flag == Flag::Dispute && flag == Flag::Idle {
            self.metrics.finalize_height = Some(now);
            self.metrics.payout_state = self.channel_contract().and_then(|c| c.accepted);
            if let Some(close) = self.metrics.close_height {
                self.metrics.blocks_to_payout = Some(now - close);
            }
        }
        self.prev_flag = flag;

        let new_receipts = self
            .recorder
            .blocks
            .last()
            .map(|b| b.receipts.clone())
            .unwrap_or_default();
        for receipt in &new_receipts {
            if receipt.method == "tower.update" && receipt.status.is_ok() {
                self.metrics.update_tx_count += 1;
                if let Some(len) = self.update_bitmaps.get(&receipt.tx_id) {
                    self.metrics.bitmap_bytes.push(*len);
                }
            }
            if receipt.method == "channel.challenge"
                && receipt.status.is_ok()
                && receipt.sender == customer_pk
            {
                let delta = self.chain.balance_of(&customer_pk) - customer_before;
                self.metrics.challenge_refund = Some(delta);
                self.recorder.note(format!("challenge refunded {delta} tokens"));
            }
        }
    }

    fn finished(&self) -> bool {
        if !self.close_submitted || self.channel_flag() != Flag::Idle {
            return false;
        }
        if !self.bus.all_empty() {
            return false;
        }
        if self.actor_a.challenge_pending(&self.chain) || self.actor_b.challenge_pending(&self.chain)
        {
            return false;
        }
        self.adversary.done(&self.chain, self.channel)
    }

    fn finish(&mut self) {
        self.metrics.final_balance_a = self.chain.balance_of(&self.actor_a.kp.public());
        self.metrics.final_balance_b = self.chain.balance_of(&self.actor_b.kp.public());
        self.metrics.wire = self.bus.stats.clone();
        self.metrics.watchtower_storage_bytes = self.service.storage_bytes();
        self.metrics.watchtower_channels = self.service.channel_count();
        self.metrics.ingest_rejections = self.ingest_rejections;

        if self.metrics.finalize_height.is_none() {
            self.recorder
                .violations
                .push("run ended without channel finalization".to_string());
            return;
        }
        // The finalized state must always be one the parties co-signed.
        // When neither party had an offline window the whole script
        // completes before the close, so the latest state must win; with
        // offline windows a payment may legitimately stall past the
        // closure, in which case an earlier co-signed state settles.
        let balances = self.config.scripted_balances().expect("validated");
        let script_states: Vec<ChannelState> = balances
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| ChannelState::new(a, b, i as u128))
            .collect();
        let Some(finalized) = self.metrics.payout_state else {
            self.recorder.violations.push("finalized without a payout state".to_string());
            return;
        };
        if !script_states.contains(&finalized) {
            self.recorder.violations.push(format!(
                "finalized with unscripted state {finalized}"
            ));
        }
        let strict = self.config.availability.party_a.is_empty()
            && self.config.availability.party_b.is_empty();
        if strict && Some(&finalized) != script_states.last() {
            self.recorder.violations.push(format!(
                "finalized with {finalized}, expected latest state {}",
                script_states.last().expect("non-empty")
            ));
        }
    }
}

// ---------------------------------------------------------------------
// Short-lived assertion mode
// ---------------------------------------------------------------------

struct ShortLivedRun {
    config: ScenarioConfig,
    chain: SimChain,
    bus: MessageBus,
    actor_a: AssertionPartyActor,
    actor_b: AssertionPartyActor,
    channel: Cid,
    recorder: Recorder,
    metrics: RunMetrics,
    next_payment: usize,
    close_submitted: bool,
    prev_flag: AssertFlag,
    close_was_fresh: Option<bool>,
    completion_heights: Vec<u64>,
    last_seen_idx: u128,
}

impl ShortLivedRun {
    fn new(config: &ScenarioConfig) -> Result<ShortLivedRun, ScenarioError> {
        let mut master = ChaCha20Rng::seed_from_u64(config.seed);
        let kp_a = KeyPair::generate(&mut master);
        let kp_b = KeyPair::generate(&mut master);
        let _kp_wt = KeyPair::generate(&mut master);
        let _kp_adv = KeyPair::generate(&mut master);
        let rng_a = sub_rng(&mut master);
        let rng_b = sub_rng(&mut master);

        let mut chain = SimChain::new();
        chain.fund_account(kp_a.public(), config.deposit_a);
        chain.fund_account(kp_b.public(), config.deposit_b);
        let policy = FreshnessPolicy {
            freshness_limit: config.timeouts.freshness_limit,
            t_fast: config.timeouts.t_fast,
            fail_safe: config.timeouts.fail_safe,
        };
        let channel = chain.deploy(
            "assertion-channel",
            Contract::Assertion(crate::contracts::AssertionChannel::new(policy)),
        );

        // Fund and open on-chain first so the initial assertion can
        // anchor at a real block.
        let setup = crate::chain::Tx::signed(&kp_a, 0, channel, config.deposit_a, Call::AssertSetup);
        let deposit = crate::chain::Tx::signed(&kp_b, 0, channel, config.deposit_b, Call::AssertDeposit);
        chain
            .submit_tx(setup)
            .map_err(|e| ScenarioError::Setup(e.to_string()))?;
        chain
            .submit_tx(deposit)
            .map_err(|e| ScenarioError::Setup(e.to_string()))?;
        let mut recorder = Recorder::new(&chain);
        recorder.note("setup: assertion channel funded".to_string());
        recorder.mine(&mut chain);
        if let Some(bad) = chain.receipts().iter().find(|r| !r.status.is_ok()) {
            return Err(ScenarioError::Setup(format!(
                "setup transaction {} reverted: {:?}",
                bad.method, bad.status
            )));
        }

        let s0 = ChannelState::new(config.deposit_a, config.deposit_b, 0);
        let anchor = *chain.block_hashes().last().expect("tip exists");
        let half = sign_assertion(&kp_a, Party::A, channel, s0, anchor);
        let initial = counter_sign_assertion(&kp_b, Party::B, &half);

        let mut actor_a = AssertionPartyActor::new(
            Party::A,
            kp_a,
            kp_b.public(),
            channel,
            initial,
            config.availability.party_a.clone(),
            rng_a,
        );
        let mut actor_b = AssertionPartyActor::new(
            Party::B,
            kp_b,
            actor_a.kp.public(),
            channel,
            initial,
            config.availability.party_b.clone(),
            rng_b,
        );
        // Setup transactions above consumed sequence number zero.
        let _ = actor_a.next_seq_bump();
        let _ = actor_b.next_seq_bump();

        if config.adversary == Some(AdversaryStrategy::StaleCloser) {
            match config.close.by {
                Party::A => actor_a.passive = true,
                Party::B => actor_b.passive = true,
            }
        }

        Ok(ShortLivedRun {
            config: config.clone(),
            chain,
            bus: MessageBus::default(),
            actor_a,
            actor_b,
            channel,
            recorder,
            metrics: RunMetrics::default(),
            next_payment: 0,
            close_submitted: false,
            prev_flag: AssertFlag::Open,
            close_was_fresh: None,
            completion_heights: vec![],
            last_seen_idx: 0,
        })
    }

    fn contract_view(&self) -> Option<&crate::contracts::AssertionChannel> {
        match self.chain.contract(&self.channel) {
            Some(Contract::Assertion(c)) => Some(c),
            _ => None,
        }
    }

    fn pump(&mut self) {
        let now = self.chain.now();
        self.actor_a.observe_closing(&self.chain);
        self.actor_b.observe_closing(&self.chain);
        loop {
            let mut progressed = false;
            for role in [Party::A, Party::B] {
                let actor = match role {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                if !actor.is_online(now) {
                    continue;
                }
                let ep = actor.endpoint();
                for src in self.bus.pending_sources(ep) {
                    while let Some(bytes) = self.bus.recv(src, ep) {
                        progressed = true;
                        let out = actor.handle_message(&bytes, &self.chain);
                        if let Some(m) = out.to_peer {
                            self.bus.send(ep, Endpoint::of(role.other()), m);
                        }
                        if let Some(n) = out.note {
                            self.recorder.note(n);
                        }
                    }
               }
            }
            if !progressed {
                break;
            }
        }
        // Track payment completions for the freshness-window bound.
        let idx = self.actor_a.current.state.idx.max(self.actor_b.current.state.idx);
        while self.last_seen_idx < idx {
            self.last_seen_idx += 1;
            self.completion_heights.push(now);
        }
    }

    fn start_due_payments(&mut self) {
        loop {
            self.pump();
            let now = self.chain.now();
            let Some(step) = self.config.payments.get(self.next_payment).copied() else {
                return;
            };
            if step.at_height.unwrap_or(0) > now {
                return;
            }
            let (sender, receiver_online) = match step.from {
                Party::A => (&mut self.actor_a, self.actor_b.is_online(now)),
                Party::B => (&mut self.actor_b, self.actor_a.is_online(now)),
            };
            // Assertion exchanges are two-way within a round; both
            // parties must be reachable or the proposal would anchor at
            // a hash the peer only sees later.
            if !sender.is_online(now) || !receiver_online {
                return;
            }
            let from = sender.endpoint();
            match sender.start_payment(step.amount, &self.chain) {
                super::actors::PaymentStart::Started(bytes) => {
                    self.bus.send(from, Endpoint::of(step.from.other()), bytes);
                    self.recorder.note(format!(
                        "{}: proposed assertion payment of {} (step {})",
                        step.from, step.amount, self.next_payment
                    ));
                    self.next_payment += 1;
                }
                super::actors::PaymentStart::Busy => return,
                super::actors::PaymentStart::Refused(reason) => {
                    self.recorder.note(format!(
                        "{}: skipped assertion step {} ({reason})",
                        step.from, self.next_payment
                    ));
                    self.next_payment += 1;
                }
            }
        }
    }

    fn run(mut self) -> Result<RunTrace, ScenarioError> {
        let max_blocks = self
            .config
            .max_blocks
            .unwrap_or_else(|| self.config.default_max_blocks());

        while self.chain.now() < max_blocks {
            let now = self.chain.now();
            self.start_due_payments();
            self.pump();

            if !self.close_submitted && now >= self.config.close.at_height {
                let closer = match self.config.close.by {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                if closer.is_online(now) {
                    let with_idx = match self.config.close.with {
                        CloseWith::Latest => None,
                        CloseWith::Index(idx) => Some(idx),
                    };
                    let tx = closer.close_tx(with_idx);
                    let _ = self.chain.submit_tx(tx);
                    self.recorder.note(format!(
                        "{}: submitted assertion close ({:?})",
                        self.config.close.by, self.config.close.with
                    ));
                    self.close_submitted = true;
                }
            }

            for role in [Party::A, Party::B] {
                let actor = match role {
                    Party::A => &mut self.actor_a,
                    Party::B => &mut self.actor_b,
                };
                let (txs, notes) = actor.protect(&self.chain);
                for tx in txs {
                    let _ = self.chain.submit_tx(tx);
                }
                for note in notes {
                    self.recorder.note(note);
                }
            }

            self.recorder.mine(&mut self.chain);
            self.collect_block_metrics();

            let finished = self.close_submitted
                && self.contract_view().is_some_and(|c| c.flag == AssertFlag::Idle)
                && self.bus.all_empty();
            if finished {
                break;
            }
        }

        self.finish();
        Ok(RunTrace {
            blocks: std::mem::take(&mut self.recorder.blocks),
            metrics: self.metrics,
            violations: self.recorder.violations,
        })
    }

    fn collect_block_metrics(&mut self) {
        let now = self.chain.now();
        if self.metrics.close_height.is_none() {
            if let Some(event) = self
                .chain
                .events()
                .iter()
                .find(|e| e.kind == EventKind::Closure && e.cid == self.channel)
            {
                self.metrics.close_height = Some(event.height);
                if let Some(c) = self.contract_view() {
                    if let AssertFlag::Closing { fast, .. } = c.flag {
                        self.close_was_fresh = Some(fast);
                    }
                }
            }
        }
        let flag = self.contract_view().map_or(AssertFlag::Idle, |c| c.flag);
        if matches!(self.prev_flag, AssertFlag::Closing { .. }) && flag == AssertFlag::Idle {
            self.metrics.finalize_height = Some(now);
            self.metrics.payout_state = self.contract_view().and_then(|c| c.accepted);
            if let Some(close) = self.metrics.close_height {
                self.metrics.blocks_to_payout = Some(now - close);
            }
        }
        self.prev_flag = flag;
    }

    fn finish(&mut self) {
        self.metrics.final_balance_a = self.chain.balance_of(&self.actor_a.kp.public());
        self.metrics.final_balance_b = self.chain.balance_of(&self.actor_b.kp.public());
        self.metrics.wire = self.bus.stats.clone();
        if self.metrics.finalize_height.is_none() {
            self.recorder
                .violations
                .push("run ended without channel finalization".to_string());
            return;
        }
        // Fast-path misbehavior bound: the index gap between the
        // fresh-accepted closing state and the true latest is covered by
        // the payments exchanged within the freshness window.
        if self.close_was_fresh == Some(true) {
            if let (Some(close_h), Some(accepted)) =
                (self.metrics.close_height, self.metrics.payout_state)
            {
                let latest = self
                    .actor_a
                    .current
                    .state
                    .idx
                    .max(self.actor_b.current.state.idx);
                let gap = latest.saturating_sub(accepted.idx);
                let window_start = close_h.saturating_sub(self.config.timeouts.freshness_limit);
                let in_window = self
                    .completion_heights
                    .iter()
                    .filter(|&&h| h >= window_start)
                    .count() as u128;
                self.metrics.fresh_close_idx_gap = Some(gap);
                self.metrics.payments_in_freshness_window = Some(in_window as u64);
                if gap > in_window {
                    self.recorder.violations.push(format!(
                        "fast-path misbehavior bound violated: gap {gap} > {in_window} payments in window"
                    ));
                }
            }
        }
    }
}
