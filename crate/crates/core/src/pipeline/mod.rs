//! Config-driven experiments: baselines, VoI-gated runs, threshold sweeps
//! and the verification suite.

pub mod config;
pub mod ledger;
pub mod receiver;
pub mod runner;
mod svg;
pub mod verify;

pub use config::ExperimentConfig;
pub use ledger::{GenerationStats, Provenance, RunLedger, Scheme, TickDecision, TickRecord};
pub use runner::{run_baseline, run_baselines, run_scdgsc, run_scdgsc_with, sweep, SweepReport, SweepRow};
pub use verify::{verify, Check, VerifyOptions, VerifyReport};
