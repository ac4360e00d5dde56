//! Scenario harness: reproducible end-to-end runs wiring parties, the
//! watchtower, adversary strategies, and the simulated chain together.

pub mod actors;
pub mod adversary;
pub mod config;
pub mod metrics;
pub mod runner;

pub use config::{AdversaryStrategy, CloseWith, Mode, ScenarioConfig, Timeouts};
pub use metrics::{BlockRecord, RunMetrics, RunTrace};
pub use runner::run_scenario;
