//! Acceptance suite: every release criterion as one test, each printing
//! a PASS/FAIL line (visible with `--nocapture`). Tolerances and
//! thresholds are pinned in the assertions themselves.

mod common;

use common::{random_honest_scenario, random_payments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use towerchannel::assertions::freshness;
use towerchannel::chain::{SimChain, Tx};
use towerchannel::contracts::channel::Flag;
use towerchannel::contracts::{Call, ChannelContract, ConfirmationSet, Contract, TowerContract};
use towerchannel::crypto::KeyPair;
use towerchannel::harness::config::{Availability, CloseStep, CloseWith, PaymentStep};
use towerchannel::harness::{run_scenario, AdversaryStrategy, Mode, ScenarioConfig};
use towerchannel::protocol::{initial_signatures, PartyLedger};
use towerchannel::types::{hash_commit, ChannelState, Cid, Fraction, Nonce, Party};
use towerchannel::watchtower::WatchtowerService;
use towerchannel::wire;

fn report(name: &str, check: impl FnOnce() -> Result<(), String>) {
    match check() {
        Ok(()) => println!("criterion {name}: PASS"),
        Err(message) => {
            println!("criterion {name}: FAIL — {message}");
            panic!("criterion {name} failed: {message}");
        }
    }
}

fn ensure(cond: bool, message: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn small_timeouts() -> towerchannel::harness::Timeouts {
    towerchannel::harness::Timeouts {
        tolerance: 16,
        fail_safe: 64,
        t_fast: 2,
        freshness_limit: 4,
        period: 4,
    }
}

fn walkthrough_config(seed: u64, close_with: CloseWith, adversary: Option<AdversaryStrategy>) -> ScenarioConfig {
    let mut config = ScenarioConfig::watchtower_defaults(seed, 10, 0);
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: None },
        PaymentStep { from: Party::A, amount: 3, at_height: None },
    ];
    config.close = CloseStep { by: Party::A, with: close_with, at_height: 3 };
    config.adversary = adversary;
    config
}

/// Criterion 1: the worked three-state walkthrough. An honest close with
/// the latest state pays out exactly (4, 6); a stale close disputed by
/// the counter-party ends the same way and earns the closer nothing.
#[test]
fn criterion_01_walkthrough_reproduction() {
    report("1 (walkthrough reproduction)", || {
        let started = std::time::Instant::now();

        let honest = run_scenario(&walkthrough_config(1, CloseWith::Latest, None))
            .map_err(|e| e.to_string())?;
        ensure(honest.passed(), format!("honest violations: {:?}", honest.violations))?;
        ensure(
            honest.metrics.payout_state == Some(ChannelState::new(4, 6, 2)),
            format!("honest payout {:?}", honest.metrics.payout_state),
        )?;
        ensure(
            honest.metrics.final_balance_a == 4 && honest.metrics.final_balance_b == 6,
            "honest final balances must be exactly (4, 6)",
        )?;

        let stale = run_scenario(&walkthrough_config(
            1,
            CloseWith::Index(1),
            Some(AdversaryStrategy::StaleCloser),
        ))
        .map_err(|e| e.to_string())?;
        ensure(stale.passed(), format!("stale violations: {:?}", stale.violations))?;
        ensure(
            stale.metrics.payout_state == Some(ChannelState::new(4, 6, 2)),
            format!("stale-close payout {:?}", stale.metrics.payout_state),
        )?;
        // Zero adversary gain: the stale closer ends with exactly the
        // honest outcome.
        ensure(
            stale.metrics.final_balance_a == honest.metrics.final_balance_a,
            format!(
                "adversary gained: {} vs honest {}",
                stale.metrics.final_balance_a, honest.metrics.final_balance_a
            ),
        )?;

        let elapsed = started.elapsed();
        ensure(
            elapsed.as_secs_f64() < 1.0,
            format!("walkthrough took {:.3} s, budget 1 s", elapsed.as_secs_f64()),
        )
    });
}

/// Criterion 2: with an online watchtower the common case finalizes
/// within two blocks of the close transaction, across 100 randomized
/// honest scenarios.
#[test]
fn criterion_02_common_case_latency() {
    report("2 (common-case latency <= 2 blocks)", || {
        let mut timeouts = towerchannel::harness::Timeouts::default();
        timeouts.period = timeouts.tolerance / 16;
        for seed in 0..100 {
            let config = random_honest_scenario(seed, timeouts);
            let trace = run_scenario(&config).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(trace.passed(), format!("seed {seed} violations: {:?}", trace.violations))?;
            let blocks = trace
                .metrics
                .blocks_to_payout
                .ok_or(format!("seed {seed}: no payout"))?;
            ensure(
                blocks <= 2,
                format!("seed {seed}: payout took {blocks} blocks"),
            )?;
        }
        Ok(())
    });
}

/// Criterion 3: with the watchtower offline past the tolerance deadline,
/// nothing pays out before `end` and the party-driven payout lands at
/// exactly `end + 1` with the correct state, across 100 random windows.
#[test]
fn criterion_03_fail_safe_timeout() {
    report("3 (fail-safe timeout)", || {
        for seed in 0..100 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xFA11_5AFE);
            let tolerance = rng.gen_range(8..=32);
            let fail_safe = rng.gen_range(32..=96);
            let deposit_a = rng.gen_range(1..=40);
            let deposit_b = rng.gen_range(0..=40);
            let mut config = ScenarioConfig {
                seed,
                mode: Mode::Watchtower,
                timeouts: towerchannel::harness::Timeouts {
                    tolerance,
                    fail_safe,
                    t_fast: 2,
                    freshness_limit: 4,
                    period: rng.gen_range(1..tolerance.min(8)),
                },
                deposit_a,
                deposit_b,
                tower_deposit: 100,
                payments: random_payments(&mut rng, deposit_a, deposit_b),
                close: CloseStep {
                    by: Party::A,
                    with: CloseWith::Latest,
                    at_height: rng.gen_range(1..=10),
                },
                availability: Availability::default(),
                adversary: None,
                snapshot_path: None,
                max_blocks: None,
            };
            let close_block = config.close.at_height + 1;
            let end = close_block + tolerance + fail_safe;
            // Random offline window covering the whole episode.
            let window_start = rng.gen_range(0..=config.close.at_height);
            let window_end = end + rng.gen_range(2..=40);
            config.availability.watchtower = vec![(window_start, window_end)];

            let trace = run_scenario(&config).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(trace.passed(), format!("seed {seed} violations: {:?}", trace.violations))?;
            ensure(
                trace.metrics.close_height == Some(close_block),
                format!("seed {seed}: close at {:?}", trace.metrics.close_height),
            )?;
            ensure(
                trace.metrics.finalize_height == Some(end + 1),
                format!(
                    "seed {seed}: finalized at {:?}, end was {end}",
                    trace.metrics.finalize_height
                ),
            )?;
            // No successful payout anywhere before end + 1.
            for block in &trace.blocks {
                for receipt in &block.receipts {
                    if receipt.method == "channel.payout" && receipt.status.is_ok() {
                        ensure(
                            receipt.height == end + 1,
                            format!("seed {seed}: payout at {} before end {end}", receipt.height),
                        )?;
                    }
                }
            }
            let balances = config.scripted_balances().expect("valid");
            let (bal_a, bal_b) = *balances.last().unwrap();
            ensure(
                trace.metrics.payout_state
                    == Some(ChannelState::new(bal_a, bal_b, config.final_idx())),
                format!("seed {seed}: wrong final state {:?}", trace.metrics.payout_state),
            )?;
        }
        Ok(())
    });
}

/// Criterion 4: a watchtower response at ddl + f*T sets the penalty
/// fraction to exactly min(1, f), and a challenge then transfers
/// floor(deposit * perc).
#[test]
fn criterion_04_linear_rewarding() {
    report("4 (linear rewarding, exact rationals)", || {
        const TOL: u64 = 16;
        const FS: u64 = 64;
        const DEPOSIT: u128 = 100;
        // f as (numerator, denominator), response offset f*T in blocks.
        for (num, den) in [(0u64, 1u64), (1, 4), (1, 2), (1, 1), (2, 1)] {
            let offset = FS * num / den;
            let alice = KeyPair::from_label("acc4-alice");
            let bob = KeyPair::from_label("acc4-bob");
            let wt = KeyPair::from_label("acc4-wt");
            let mut chain = SimChain::new();
            chain.fund_account(alice.public(), 10);
            chain.fund_account(bob.public(), DEPOSIT);
            let tower = chain.deploy("tower", Contract::Tower(TowerContract::new(wt.public())));
            let channel = chain.deploy("channel", Contract::Channel(ChannelContract::new(TOL, FS)));

            let state = ChannelState::new(4, 6, 2);
            let r = Nonce([7u8; 32]);
            let payload =
                wire::payment_sign_payload(&channel, state.idx, &hash_commit(&state, &r));
            let (sig_a, sig_b) = (alice.sign(&payload), bob.sign(&payload));

            for tx in [
                Tx::signed(&alice, 0, channel, 10, Call::ChannelSetup { tower, wt_pk: wt.public() }),
                Tx::signed(&bob, 0, channel, 0, Call::ChannelDeposit),
                Tx::signed(&bob, 1, tower, DEPOSIT, Call::TowerDeposit { cid: channel }),
                Tx::signed(&alice, 1, channel, 0, Call::ChannelClose { state, r, sig_a, sig_b }),
            ] {
                chain.submit_tx(tx).unwrap();
            }
            chain.mine_block();
            let (ddl, end) = match chain.contract(&channel) {
                Some(Contract::Channel(c)) => (c.ddl, c.end),
                _ => unreachable!(),
            };

            // Respond at exactly ddl + f*T.
            while chain.now() < ddl + offset - 1 {
                chain.mine_block();
            }
            chain
                .submit_tx(Tx::signed(
                    &wt,
                    0,
                    tower,
                    0,
                    Call::TowerUpdate { confs: ConfirmationSet::new(vec![true]) },
                ))
                .unwrap();
            chain.mine_block();
            ensure(chain.now() == ddl + offset, "response height drifted")?;

            let perc = match chain.contract(&channel) {
                Some(Contract::Channel(c)) => c.perc,
                _ => unreachable!(),
            };
            let expected = Fraction::new(u128::from(num), u128::from(den)).min_one();
            ensure(
                perc == expected,
                format!("f={num}/{den}: perc {perc} != {expected}"),
            )?;

            // Challenge claws back floor(deposit * perc).
            while chain.now() <= end {
                chain.mine_block();
            }
            let before = chain.balance_of(&bob.public());
            let receipt_sig =
                wt.sign(&wire::receipt_sign_payload(&channel, state.idx, &hash_commit(&state, &r)));
            chain
                .submit_tx(Tx::signed(
                    &bob,
                    2,
                    channel,
                    0,
                    Call::ChannelChallenge { state, r, sig_wt: receipt_sig },
                ))
                .unwrap();
            chain.mine_block();
            let refunded = chain.balance_of(&bob.public()) - before;
            let expected_refund = expected.floor_mul(DEPOSIT);
            ensure(
                refunded == expected_refund,
                format!("f={num}/{den}: refund {refunded} != floor({DEPOSIT}*{expected}) = {expected_refund}"),
            )?;
        }
        Ok(())
    });
}

/// Criterion 5: wire sizes are exactly 198 / 195 / 165 bytes and the
/// golden hex vectors round-trip.
#[test]
fn criterion_05_wire_format_bit_exactness() {
    report("5 (wire-format bit-exactness)", || {
        ensure(wire::SUBMISSION_LEN == 198, "submission length")?;
        ensure(wire::RECEIPT_LEN == 195, "receipt length")?;
        ensure(wire::PAYMENT_MSG_LEN == 165, "payment message length")?;
        towerchannel::vectors::verify_format_vectors().map_err(|e| e.to_string())?;
        let v = towerchannel::vectors::build_vector_exchange();
        ensure(v.submission.encode().len() == 198, "encoded submission length")?;
        ensure(v.receipt.encode().len() == 195, "encoded receipt length")?;
        ensure(v.proposal.encode().len() == 165, "encoded proposal length")?;
        Ok(())
    });
}

/// Criterion 6: one update period with m pending closures costs exactly
/// one update transaction carrying a ceil(m/8)-byte bitmap.
#[test]
fn criterion_06_confirmation_set_economy() {
    report("6 (confirmation-set economy)", || {
        for m in [1usize, 10, 100, 1000] {
            let alice = KeyPair::from_label("acc6-alice");
            let bob = KeyPair::from_label("acc6-bob");
            let wt = KeyPair::from_label("acc6-wt");
            let mut chain = SimChain::new();
            chain.fund_account(alice.public(), 10 * m as u128);
            chain.fund_account(bob.public(), m as u128);
            let tower = chain.deploy("tower", Contract::Tower(TowerContract::new(wt.public())));
            let mut service = WatchtowerService::new(wt.clone(), tower, 16);

            let mut channels = Vec::with_capacity(m);
            let mut seq_a = 0u64;
            let mut seq_b = 0u64;
            for i in 0..m {
                let cid = chain.deploy(
                    &format!("channel-{i}"),
                    Contract::Channel(ChannelContract::new(256, 5760)),
                );
                channels.push(cid);
                chain
                    .submit_tx(Tx::signed(
                        &alice,
                        seq_a,
                        cid,
                        10,
                        Call::ChannelSetup { tower, wt_pk: wt.public() },
                    ))
                    .unwrap();
                seq_a += 1;
                chain
                    .submit_tx(Tx::signed(&bob, seq_b, cid, 0, Call::ChannelDeposit))
                    .unwrap();
                seq_b += 1;
                chain
                    .submit_tx(Tx::signed(&bob, seq_b, tower, 1, Call::TowerDeposit { cid }))
                    .unwrap();
                seq_b += 1;
            }
            chain.mine_block();

            // Register and record the latest state for every channel,
            // then close them all inside one period.
            for &cid in &channels {
                service
                    .register_channel(&chain, cid, alice.public(), bob.public())
                    .map_err(|e| format!("m={m}: register: {e}"))?;
                let state = ChannelState::new(4, 6, 2);
                let r = Nonce([9u8; 32]);
                let h = hash_commit(&state, &r);
                let payload = wire::payment_sign_payload(&cid, state.idx, &h);
                let submission = wire::WatchtowerSubmission {
                    cid,
                    h_s: h,
                    idx: state.idx,
                    sig_a: alice.sign(&payload),
                    sig_b: bob.sign(&payload),
                };
                service.ingest(&submission).map_err(|e| format!("m={m}: ingest: {e}"))?;
                let close = Call::ChannelClose {
                    state,
                    r,
                    sig_a: alice.sign(&payload),
                    sig_b: bob.sign(&payload),
                };
                chain.submit_tx(Tx::signed(&alice, seq_a, cid, 0, close)).unwrap();
                seq_a += 1;
            }
            chain.mine_block();

            let update = service.tick(&chain).ok_or(format!("m={m}: no update produced"))?;
            let bitmap_len = match &update.call {
                Call::TowerUpdate { confs } => {
                    ensure(confs.len() == m, format!("m={m}: confs length {}", confs.len()))?;
                    confs.bitmap_len()
                }
                _ => return Err(format!("m={m}: unexpected call")),
            };
            ensure(
                bitmap_len == m.div_ceil(8),
                format!("m={m}: bitmap {bitmap_len} bytes, expected {}", m.div_ceil(8)),
            )?;
            if m == 1000 {
                ensure(bitmap_len == 125, "m=1000 must need exactly 125 bitmap bytes")?;
                // Storage economy: a thousand watched channels fit in at
                // most twice the raw 198-byte record size each.
                let storage = service.storage_bytes();
                ensure(
                    (198 * 1000..=2 * 198 * 1000).contains(&storage),
                    format!("m=1000: storage {storage} outside [198000, 396000]"),
                )?;
            }
            chain.submit_tx(update).unwrap();
            chain.mine_block();
            // Nothing further pending, and exactly one update landed.
            ensure(service.tick(&chain).is_none(), format!("m={m}: extra update"))?;
            let updates = chain
                .receipts()
                .iter()
                .filter(|r| r.method == "tower.update")
                .count();
            ensure(updates == 1, format!("m={m}: {updates} update txs"))?;
            for &cid in &channels {
                match chain.contract(&cid) {
                    Some(Contract::Channel(c)) => {
                        ensure(c.flag == Flag::Idle, format!("m={m}: channel not settled"))?
                    }
                    _ => return Err("missing channel".into()),
                }
            }
        }
        Ok(())
    });
}

/// Criterion 7: over ten thousand fuzzed payments, no balance bytes,
/// state encoding, or nonce ever appears inside the party-to-watchtower
/// boundary traffic.
#[test]
fn criterion_07_privacy_boundary() {
    report("7 (privacy boundary, 10^4 fuzzed payments)", || {
        let alice = KeyPair::from_label("acc7-alice");
        let bob = KeyPair::from_label("acc7-bob");
        let cid = Cid::derive("acc7-channel", 0);
        let capacity: u128 = 1 << 40;
        let s0 = ChannelState::new(capacity / 2, capacity / 2, 0);
        let r0 = Nonce([3u8; 32]);
        let (sig_a0, sig_b0) = initial_signatures(&alice, &bob, &cid, &s0, &r0);
        let mut ledger_a = PartyLedger::open(cid, Party::A, s0, r0, sig_a0, sig_b0);
        let mut ledger_b = PartyLedger::open(cid, Party::B, s0, r0, sig_b0, sig_a0);
        let mut rng = ChaCha20Rng::seed_from_u64(0x7777);

        fn contains(haystack: &[u8], needle: &[u8]) -> bool {
            haystack.windows(needle.len()).any(|w| w == needle)
        }

        for i in 0..10_000u32 {
            let (sender_kp, receiver_kp, sender, receiver) = if rng.gen_bool(0.5) {
                (&alice, &bob, &mut ledger_a, &mut ledger_b)
            } else {
                (&bob, &alice, &mut ledger_b, &mut ledger_a)
            };
            let budget = sender.my_balance();
            if budget == 0 {
                continue;
            }
            let amount = rng.gen_range(1..=budget.min(1 << 32)) as i128;
            let proposal = sender.propose_payment(sender_kp, amount, &mut rng).unwrap();
            let (reply, submission) = receiver
                .accept_payment(receiver_kp, &sender_kp.public(), &proposal)
                .unwrap();
            sender.finalize_proposal(&receiver_kp.public(), &reply).unwrap();

            // The boundary message: exactly what crosses to the tower.
            let bytes = submission.encode();
            ensure(bytes.len() == 198, format!("payment {i}: submission not 198 bytes"))?;
            let state = proposal.state;
            for (name, pattern) in [
                ("bal_a", state.bal_a.to_be_bytes().to_vec()),
                ("bal_b", state.bal_b.to_be_bytes().to_vec()),
                ("state encoding", state.encode().to_vec()),
                ("nonce", proposal.r.0.to_vec()),
            ] {
                ensure(
                    !contains(&bytes, &pattern),
                    format!("payment {i}: {name} leaked across the boundary"),
                )?;
            }
        }
        Ok(())
    });
}

/// Criterion 8: the freshness verdict agrees with a brute-force scan of
/// the whole chain for all anchor/submission heights up to 64 and
/// limits 1..=8; end to end, fresh closes finalize in t_fast = 2 blocks
/// and stale closes wait out the fail-safe timeout.
#[test]
fn criterion_08_short_lived_freshness() {
    report("8 (short-lived freshness oracle + e2e paths)", || {
        let mut chain = SimChain::new();
        while chain.now() < 64 {
            chain.mine_block();
        }
        let hashes = chain.block_hashes().to_vec();
        for w in 0..=64usize {
            let view = &hashes[..=w];
            for h in 0..=w {
                for n in 1..=8u64 {
                    // Independent oracle: locate the anchor by scanning
                    // the whole chain, then compare heights.
                    let position = view.iter().position(|x| *x == hashes[h]).unwrap();
                    let oracle_fresh = (w - position) < n as usize;
                    let got = freshness(view, &hashes[h], n) == towerchannel::assertions::Freshness::Fresh;
                    ensure(
                        got == oracle_fresh,
                        format!("disagreement at anchor {h}, tip {w}, n {n}: got {got}"),
                    )?;
                }
            }
        }

        // End to end: a fresh close pays out exactly t_fast = 2 blocks
        // after the close transaction.
        let mut fresh = ScenarioConfig::watchtower_defaults(5, 10, 0);
        fresh.mode = Mode::ShortLived;
        fresh.timeouts = small_timeouts();
        fresh.payments = vec![
            PaymentStep { from: Party::A, amount: 3, at_height: None },
            PaymentStep { from: Party::A, amount: 3, at_height: None },
        ];
        fresh.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
        let trace = run_scenario(&fresh).map_err(|e| e.to_string())?;
        ensure(trace.passed(), format!("fresh violations: {:?}", trace.violations))?;
        ensure(
            trace.metrics.blocks_to_payout == Some(2),
            format!("fresh path took {:?} blocks", trace.metrics.blocks_to_payout),
        )?;
        ensure(
            trace.metrics.payout_state == Some(ChannelState::new(4, 6, 2)),
            "fresh path payout state",
        )?;

        // A stale close with no dispute waits the full fail-safe window.
        let mut stale = ScenarioConfig::watchtower_defaults(6, 10, 0);
        stale.mode = Mode::ShortLived;
        stale.timeouts = small_timeouts();
        stale.timeouts.freshness_limit = 2;
        stale.payments = vec![PaymentStep { from: Party::A, amount: 3, at_height: Some(1) }];
        // Both parties consider state 1 final; the close just anchors at
        // a hash far outside the freshness window.
        stale.close = CloseStep { by: Party::A, with: CloseWith::Index(1), at_height: 9 };
        let trace = run_scenario(&stale).map_err(|e| e.to_string())?;
        ensure(trace.passed(), format!("stale violations: {:?}", trace.violations))?;
        ensure(
            trace.metrics.blocks_to_payout == Some(stale.timeouts.fail_safe),
            format!(
                "stale path took {:?} blocks, expected {}",
                trace.metrics.blocks_to_payout, stale.timeouts.fail_safe
            ),
        )?;
        Ok(())
    });
}

/// Criterion 9: a thousand randomized mixed scenarios conserve tokens
/// exactly; no channel ever pays out more than was deposited.
#[test]
fn criterion_09_conservation_fuzzing() {
    report("9 (conservation fuzzing, 10^3 scenarios)", || {
        for seed in 0..1000u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xC05E_4A11);
            let config = random_mixed_scenario(seed, &mut rng);
            let initial_tokens =
                config.deposit_a + config.deposit_b + config.tower_deposit;
            let trace = run_scenario(&config).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(
                trace.passed(),
                format!("seed {seed} ({:?}): violations {:?}", config.adversary, trace.violations),
            )?;
            // Tokens out never exceed tokens in; the channel pays out
            // exactly its capacity, and anything extra is the tower
            // deposit clawed back by a challenge.
            let out = trace.metrics.final_balance_a + trace.metrics.final_balance_b;
            let expected = config.deposit_a
                + config.deposit_b
                + trace.metrics.challenge_refund.unwrap_or(0);
            ensure(
                out == expected,
                format!("seed {seed}: paid {out}, expected {expected}"),
            )?;
            ensure(
                out <= initial_tokens,
                format!("seed {seed}: paid out more than deposited"),
            )?;
        }
        Ok(())
    });
}

fn random_mixed_scenario(seed: u64, rng: &mut ChaCha20Rng) -> ScenarioConfig {
    let tolerance = rng.gen_range(8..=24);
    let fail_safe = rng.gen_range(32..=80);
    let deposit_a = rng.gen_range(1..=30);
    let deposit_b = rng.gen_range(0..=30);
    let payments = random_payments(rng, deposit_a, deposit_b);
    let adversary = match rng.gen_range(0..5) {
        0 => None,
        1 => Some(AdversaryStrategy::StaleCloser),
        2 => Some(AdversaryStrategy::ReplayMitm),
        3 => Some(AdversaryStrategy::ConfsTamperer),
        _ => Some(AdversaryStrategy::SilentWt),
    };
    let close_by = if rng.gen_bool(0.5) { Party::A } else { Party::B };
    let close_with = if adversary == Some(AdversaryStrategy::StaleCloser) && !payments.is_empty() {
        CloseWith::Index(rng.gen_range(0..payments.len()) as u128)
    } else {
        CloseWith::Latest
    };
    let mut config = ScenarioConfig {
        seed,
        mode: Mode::Watchtower,
        timeouts: towerchannel::harness::Timeouts {
            tolerance,
            fail_safe,
            t_fast: 2,
            freshness_limit: 4,
            period: rng.gen_range(1..=tolerance / 2),
        },
        deposit_a,
        deposit_b,
        tower_deposit: rng.gen_range(1..=100),
        payments,
        close: CloseStep { by: close_by, with: close_with, at_height: rng.gen_range(1..=8) },
        availability: Availability::default(),
        adversary,
        snapshot_path: None,
        max_blocks: None,
    };
    // Random bounded offline windows for the victim party.
    if rng.gen_bool(0.4) {
        let victim = config.close.by.other();
        let start = rng.gen_range(0..=config.close.at_height + 2);
        let len = rng.gen_range(1..fail_safe);
        let window = vec![(start, start + len - 1)];
        match victim {
            Party::A => config.availability.party_a = window,
            Party::B => config.availability.party_b = window,
        }
    }
    config
}

/// Criterion 10: identical configs replay to byte-identical traces.
#[test]
fn criterion_10_determinism() {
    report("10 (deterministic traces)", || {
        let mut configs = vec![
            walkthrough_config(77, CloseWith::Latest, None),
            walkthrough_config(78, CloseWith::Index(1), Some(AdversaryStrategy::StaleCloser)),
        ];
        let mut offline = walkthrough_config(79, CloseWith::Latest, None);
        offline.timeouts = small_timeouts();
        offline.availability.watchtower = vec![(2, 200)];
        configs.push(offline);
        let mut short = walkthrough_config(80, CloseWith::Latest, None);
        short.mode = Mode::ShortLived;
        short.timeouts = small_timeouts();
        configs.push(short);

        for (i, config) in configs.iter().enumerate() {
            let first = run_scenario(config).map_err(|e| format!("config {i}: {e}"))?;
            let second = run_scenario(config).map_err(|e| format!("config {i}: {e}"))?;
            ensure(
                first.to_jsonl() == second.to_jsonl(),
                format!("config {i}: trace bytes differ between runs"),
            )?;
            ensure(
                first.metrics_json() == second.metrics_json(),
                format!("config {i}: metrics differ between runs"),
            )?;
            ensure(!first.to_jsonl().is_empty(), "trace must not be empty")?;
        }
        Ok(())
    });
}
