//! Runs the fast part of the verification suite, then shows that a
//! corrupted schedule table is caught by name.
//!
//! cargo run --release --example verify_suite

use scdgsc::diffusion::VarianceSchedule;
use scdgsc::pipeline::{verify, ExperimentConfig, VerifyOptions};

fn main() -> scdgsc::Result<()> {
    let cfg = ExperimentConfig::default();
    let report = verify(&cfg, &VerifyOptions { filter: Some("channel".into()), ..Default::default() })?;
    for c in &report.checks {
        println!("{}", c.line());
    }

    let good = cfg.schedule()?;
    let mut alpha_bars = good.alpha_bars().to_vec();
    alpha_bars[10] *= 1.01;
    let corrupted = VarianceSchedule::from_parts_unchecked(good.betas().to_vec(), alpha_bars);
    let opts = VerifyOptions {
        schedule_override: Some(corrupted),
        filter: Some("schedule".into()),
        ..Default::default()
    };
    println!("\nwith a corrupted alpha-bar table:");
    for c in verify(&cfg, &opts)?.checks {
        println!("{}", c.line());
    }
    Ok(())
}
