//! End-to-end scenario integration tests: one test per closure path
//! the runner supports, asserting the exact heights, payouts, and
//! penalties each path produces.
use towerchannel::harness::config::{CloseStep, CloseWith, PaymentStep, ScenarioConfig};
use towerchannel::harness::run_scenario;
use towerchannel::types::Party;

#[test]
fn scenario_honest_walkthrough() {
    let mut config = ScenarioConfig::watchtower_defaults(42, 10, 0);
    config.timeouts.tolerance = 16;
    config.timeouts.fail_safe = 64;
    config.timeouts.period = 4;
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: None },
        PaymentStep { from: Party::A, amount: 3, at_height: None },
    ];
    config.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    assert_eq!(trace.metrics.payout_state.map(|s| (s.bal_a, s.bal_b)), Some((4, 6)));
    assert!(trace.metrics.blocks_to_payout.unwrap() <= 2);
    // Every message class carries exactly its pinned encoding size.
    let wire = &trace.metrics.wire;
    assert_eq!(wire.party_to_party.sizes.iter().copied().collect::<Vec<_>>(), vec![165]);
    assert_eq!(wire.party_to_wt.sizes.iter().copied().collect::<Vec<_>>(), vec![198]);
    assert_eq!(wire.wt_to_party.sizes.iter().copied().collect::<Vec<_>>(), vec![195]);
}

#[test]
fn scenario_stale_close_disputed() {
    let mut config = ScenarioConfig::watchtower_defaults(7, 10, 0);
    config.timeouts.tolerance = 16;
    config.timeouts.fail_safe = 64;
    config.timeouts.period = 4;
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: None },
        PaymentStep { from: Party::A, amount: 3, at_height: None },
    ];
    config.close = CloseStep { by: Party::A, with: CloseWith::Index(1), at_height: 3 };
    config.adversary = Some(towerchannel::harness::AdversaryStrategy::StaleCloser);
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    assert_eq!(trace.metrics.payout_state.map(|s| (s.bal_a, s.bal_b)), Some((4, 6)));
}

#[test]
fn scenario_wt_offline_failsafe() {
    let mut config = ScenarioConfig::watchtower_defaults(9, 10, 0);
    config.timeouts.tolerance = 16;
    config.timeouts.fail_safe = 64;
    config.timeouts.period = 4;
    config.payments = vec![PaymentStep { from: Party::A, amount: 3, at_height: None }];
    config.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
    config.availability.watchtower = vec![(3, 10_000)];
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    // close at block 4, ddl = 20, end = 84 → party payout at 85.
    assert_eq!(trace.metrics.close_height, Some(4));
    assert_eq!(trace.metrics.finalize_height, Some(85));
    assert_eq!(trace.metrics.challenge_refund, Some(100));
}

#[test]
fn scenario_short_lived_fresh() {
    let mut config = ScenarioConfig::watchtower_defaults(11, 10, 0);
    config.mode = towerchannel::harness::Mode::ShortLived;
    config.timeouts.fail_safe = 64;
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: None },
        PaymentStep { from: Party::A, amount: 3, at_height: None },
    ];
    config.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    assert_eq!(trace.metrics.blocks_to_payout, Some(2));
    assert_eq!(trace.metrics.payout_state.map(|s| (s.bal_a, s.bal_b)), Some((4, 6)));
}

#[test]
fn scenario_short_lived_stale_dispute() {
    let mut config = ScenarioConfig::watchtower_defaults(13, 10, 0);
    config.mode = towerchannel::harness::Mode::ShortLived;
    config.timeouts.fail_safe = 64;
    config.timeouts.freshness_limit = 2;
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: Some(1) },
        PaymentStep { from: Party::A, amount: 3, at_height: Some(8) },
    ];
    config.close = CloseStep { by: Party::A, with: CloseWith::Index(1), at_height: 8 };
    config.adversary = Some(towerchannel::harness::AdversaryStrategy::StaleCloser);
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    assert_eq!(trace.metrics.payout_state.map(|s| (s.bal_a, s.bal_b)), Some((4, 6)));
}

#[test]
fn scenario_determinism() {
    let mut config = ScenarioConfig::watchtower_defaults(99, 10, 5);
    config.timeouts.tolerance = 16;
    config.timeouts.fail_safe = 64;
    config.timeouts.period = 4;
    config.payments = vec![
        PaymentStep { from: Party::A, amount: 3, at_height: None },
        PaymentStep { from: Party::B, amount: 2, at_height: Some(2) },
    ];
    config.close = CloseStep { by: Party::B, with: CloseWith::Latest, at_height: 4 };
    let t1 = run_scenario(&config).unwrap();
    let t2 = run_scenario(&config).unwrap();
    assert!(t1.passed());
    assert_eq!(t1.to_jsonl(), t2.to_jsonl());
    assert_eq!(t1.metrics_json(), t2.metrics_json());
}

#[test]
fn scenario_mitm_and_tamper() {
    for (seed, strategy) in [
        (21, towerchannel::harness::AdversaryStrategy::ReplayMitm),
        (22, towerchannel::harness::AdversaryStrategy::ConfsTamperer),
    ] {
        let mut config = ScenarioConfig::watchtower_defaults(seed, 10, 0);
        config.timeouts.tolerance = 16;
        config.timeouts.fail_safe = 64;
        config.timeouts.period = 4;
        config.payments = vec![PaymentStep { from: Party::A, amount: 3, at_height: None }];
        config.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
        config.adversary = Some(strategy);
        let trace = run_scenario(&config).unwrap();
        eprintln!("[{strategy:?}] violations: {:?}", trace.violations);
        assert!(trace.passed(), "{strategy:?}");
        assert_eq!(trace.metrics.payout_state.map(|s| (s.bal_a, s.bal_b)), Some((7, 3)));
        if strategy == towerchannel::harness::AdversaryStrategy::ReplayMitm {
            assert!(trace.metrics.ingest_rejections >= 1);
        }
    }
}

#[test]
fn scenario_silent_wt() {
    let mut config = ScenarioConfig::watchtower_defaults(31, 10, 0);
    config.timeouts.tolerance = 16;
    config.timeouts.fail_safe = 64;
    config.timeouts.period = 4;
    config.payments = vec![PaymentStep { from: Party::A, amount: 3, at_height: None }];
    config.close = CloseStep { by: Party::A, with: CloseWith::Latest, at_height: 3 };
    config.adversary = Some(towerchannel::harness::AdversaryStrategy::SilentWt);
    let trace = run_scenario(&config).unwrap();
    eprintln!("violations: {:?}", trace.violations);
    eprintln!("metrics: {}", trace.metrics_json());
    assert!(trace.passed());
    // Late response at ddl + T/2 → challenge recovers half the deposit.
    assert_eq!(trace.metrics.challenge_refund, Some(50));
}
