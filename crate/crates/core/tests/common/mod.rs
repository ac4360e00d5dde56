//! Shared helpers for the integration suites: randomized scenario
//! generation driven by a single seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use towerchannel::harness::config::{
    Availability, CloseStep, CloseWith, PaymentStep, ScenarioConfig, Timeouts,
};
use towerchannel::harness::Mode;
use towerchannel::types::Party;

/// A payment script that always respects the channel capacity.
pub fn random_payments(rng: &mut ChaCha20Rng, deposit_a: u128, deposit_b: u128) -> Vec<PaymentStep> {
    let count = rng.gen_range(0..6);
    let (mut bal_a, mut bal_b) = (deposit_a, deposit_b);
    let mut steps = Vec::with_capacity(count);
    for _ in 0..count {
        let from = if rng.gen_bool(0.5) { Party::A } else { Party::B };
        let available = match from {
            Party::A => bal_a,
            Party::B => bal_b,
        };
        if available == 0 {
            continue;
        }
        let amount = rng.gen_range(1..=available);
        match from {
            Party::A => {
                bal_a -= amount;
                bal_b += amount;
            }
            Party::B => {
                bal_b -= amount;
                bal_a += amount;
            }
        }
        steps.push(PaymentStep { from, amount, at_height: None });
    }
    steps
}

/// A randomized honest watchtower-mode scenario: scripted payments, a
/// latest-state close at a random height, everyone online.
pub fn random_honest_scenario(seed: u64, timeouts: Timeouts) -> ScenarioConfig {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let deposit_a = rng.gen_range(1..=50);
    let deposit_b = rng.gen_range(0..=50);
    let payments = random_payments(&mut rng, deposit_a, deposit_b);
    let close_by = if rng.gen_bool(0.5) { Party::A } else { Party::B };
    ScenarioConfig {
        seed,
        mode: Mode::Watchtower,
        timeouts,
        deposit_a,
        deposit_b,
        tower_deposit: rng.gen_range(10..=200),
        payments,
        close: CloseStep {
            by: close_by,
            with: CloseWith::Latest,
            at_height: rng.gen_range(1..=16),
        },
        availability: Availability::default(),
        adversary: None,
        snapshot_path: None,
        max_blocks: None,
    }
}
