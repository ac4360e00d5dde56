//! Scenario-runner CLI: execute reproducible channel scenarios, check
//! the golden wire-format vectors, and benchmark off-chain throughput.

use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use towerchannel::harness::{run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "towerchannel", version, about = "Payment channels with watchtower arbitration on a deterministic chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config; exit 0 iff all in-run
    /// assertions held.
    Run {
        /// Path to the scenario JSON.
        scenario: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the metrics report here.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Override the watchtower update period.
        #[arg(long)]
        period_blocks: Option<u64>,
        /// Fault injection: watchtower offline from this height...
        #[arg(long, requires = "offline_until")]
        offline_from: Option<u64>,
        /// ...through this height (inclusive).
        #[arg(long, requires = "offline_from")]
        offline_until: Option<u64>,
        /// Persist the watchtower's commitment store here.
        #[arg(long)]
        snapshot_path: Option<PathBuf>,
    },
    /// Check the golden wire-format vectors.
    VerifyFormats,
    /// Measure off-chain payment throughput with the parties and the
    /// watchtower running as concurrent tasks. Informational only.
    BenchThroughput {
        #[arg(long, default_value_t = 10_000)]
        payments: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            seed,
            trace,
            metrics,
            period_blocks,
            offline_from,
            offline_until,
            snapshot_path,
        } => run_cmd(
            scenario,
            seed,
            trace,
            metrics,
            period_blocks,
            offline_from,
            offline_until,
            snapshot_path,
        ),
        Command::VerifyFormats => verify_formats_cmd(),
        Command::BenchThroughput { payments } => bench_cmd(payments),
    };
    std::process::exit(match code {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    });
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    scenario: PathBuf,
    seed: Option<u64>,
    trace_path: Option<PathBuf>,
    metrics_path: Option<PathBuf>,
    period_blocks: Option<u64>,
    offline_from: Option<u64>,
    offline_until: Option<u64>,
    snapshot_path: Option<PathBuf>,
) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&scenario)
        .with_context(|| format!("reading {}", scenario.display()))?;
    let mut config: ScenarioConfig = serde_json::from_str(&text).context("parsing scenario JSON")?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(period) = period_blocks {
        config.timeouts.period = period;
    }
    if let (Some(from), Some(until)) = (offline_from, offline_until) {
        config.availability.watchtower.push((from, until));
    }
    if let Some(path) = snapshot_path {
        config.snapshot_path = Some(path);
    }

    let trace = run_scenario(&config).context("running scenario")?;
    if let Some(path) = trace_path {
        std::fs::write(&path, trace.to_jsonl())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = metrics_path {
        std::fs::write(&path, trace.metrics_json())
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let m = &trace.metrics;
    println!(
        "blocks: {}  close: {:?}  finalize: {:?}  blocks-to-payout: {:?}",
        trace.blocks.len(),
        m.close_height,
        m.finalize_height,
        m.blocks_to_payout
    );
    if let Some(state) = m.payout_state {
        println!("payout state: {state}");
    }
    println!(
        "wire: p2p {} msgs / {} B, p->wt {} msgs / {} B, wt->p {} msgs / {} B",
        m.wire.party_to_party.messages,
        m.wire.party_to_party.bytes,
        m.wire.party_to_wt.messages,
        m.wire.party_to_wt.bytes,
        m.wire.wt_to_party.messages,
        m.wire.wt_to_party.bytes
    );
    if trace.passed() {
        println!("all in-run assertions held");
        Ok(0)
    } else {
        for violation in &trace.violations {
            eprintln!("violation: {violation}");
        }
        Ok(1)
    }
}

fn verify_formats_cmd() -> anyhow::Result<i32> {
    match towerchannel::vectors::verify_format_vectors() {
        Ok(()) => {
            println!("wire-format vectors: OK (165 / 198 / 195 / 231 bytes, bitmap packing)");
            Ok(0)
        }
        Err(err) => {
            eprintln!("wire-format vectors: FAIL: {err}");
            Ok(1)
        }
    }
}

/// Off-chain exchange throughput with each protocol role as its own
/// thread, mirroring a deployment where parties and the watchtower are
/// independent processes. Never used by the acceptance tests.
fn bench_cmd(payments: u64) -> anyhow::Result<i32> {
    use std::sync::mpsc;
    use towerchannel::chain::SimChain;
    use towerchannel::contracts::{Call, ChannelContract, Contract, TowerContract};
    use towerchannel::crypto::KeyPair;
    use towerchannel::protocol::{initial_signatures, PartyLedger};
    use towerchannel::types::{ChannelState, Nonce, Party};
    use towerchannel::watchtower::WatchtowerService;
    use towerchannel::wire::{PaymentMessage, WatchtowerSubmission};

    let alice = KeyPair::from_label("bench-alice");
    let bob = KeyPair::from_label("bench-bob");
    let wt = KeyPair::from_label("bench-wt");

    // Minimal chain so the watchtower can verify the protection deposit.
    let mut chain = SimChain::new();
    chain.fund_account(bob.public(), 1);
    let tower = chain.deploy("tower", Contract::Tower(TowerContract::new(wt.public())));
    let cid = chain.deploy("channel", Contract::Channel(ChannelContract::new(256, 5760)));
    let deposit = towerchannel::chain::Tx::signed(&bob, 0, tower, 1, Call::TowerDeposit { cid });
    chain.submit_tx(deposit).expect("tower deployed");
    chain.mine_block();
    let mut service = WatchtowerService::new(wt, tower, 16);
    service
        .register_channel(&chain, cid, alice.public(), bob.public())
        .expect("registered");

    let capacity = payments as u128;
    let s0 = ChannelState::new(capacity, 0, 0);
    let r0 = Nonce([0x42; 32]);
    let (sig_a0, sig_b0) = initial_signatures(&alice, &bob, &cid, &s0, &r0);
    let mut ledger_a = PartyLedger::open(cid, Party::A, s0, r0, sig_a0, sig_b0);
    let mut ledger_b = PartyLedger::open(cid, Party::B, s0, r0, sig_b0, sig_a0);

    let (to_bob, bob_inbox) = mpsc::channel::<PaymentMessage>();
    let (to_alice, alice_inbox) = mpsc::channel::<PaymentMessage>();
    let (to_wt, wt_inbox) = mpsc::channel::<WatchtowerSubmission>();

    let alice_pk = alice.public();
    let start = std::time::Instant::now();
    let bob_thread = std::thread::spawn(move || {
        for _ in 0..payments {
            let proposal = bob_inbox.recv().expect("proposal");
            let (reply, submission) = ledger_b
                .accept_payment(&bob, &alice_pk, &proposal)
                .expect("valid payment");
            to_alice.send(reply).expect("alice reachable");
            to_wt.send(submission).expect("wt reachable");
        }
    });
    let wt_thread = std::thread::spawn(move || {
        let mut receipts = 0u64;
        while let Ok(submission) = wt_inbox.recv() {
            service.ingest(&submission).expect("valid submission");
            receipts += 1;
        }
        receipts
    });

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    let bob_pk = KeyPair::from_label("bench-bob").public();
    for _ in 0..payments {
        let proposal = ledger_a.propose_payment(&alice, 1, &mut rng).expect("funded");
        to_bob.send(proposal).expect("bob reachable");
        let reply = alice_inbox.recv().expect("reply");
        ledger_a
            .finalize_proposal(&bob_pk, &reply)
            .expect("valid counter-signature");
    }
    drop(to_bob);
    bob_thread.join().expect("bob thread");
    let receipts = wt_thread.join().expect("wt thread");
    let elapsed = start.elapsed();

    println!(
        "{payments} off-chain payments in {:.3} s ({:.3} ms per exchange, {:.0} tx/s, {} receipts issued)",
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e3 / payments as f64,
        payments as f64 / elapsed.as_secs_f64(),
        receipts
    );
    Ok(0)
}
