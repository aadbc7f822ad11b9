//! Energy against VoI threshold, with the full-image baselines.
//! Writes CSV, SVG and per-run ledgers to the given directory.
//!
//! cargo run --release --example threshold_sweep -- [out_dir]

use scdgsc::pipeline::{sweep, ExperimentConfig};

fn main() -> scdgsc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into());
    let cfg = ExperimentConfig::default();
    let report = sweep(&cfg, out.as_ref())?;
    let worst_baseline = report
        .baselines
        .iter()
        .map(|b| b.total_energy_j())
        .fold(f64::INFINITY, f64::min);
    for l in &report.scdgsc {
        println!(
            "threshold {:<4} transmits {:>3}/{}  {:.4e} J  ({:.3}% of the cheapest baseline)",
            l.voi_threshold().unwrap(),
            l.transmit_count(),
            l.ticks(),
            l.total_energy_j(),
            100.0 * l.total_energy_j() / worst_baseline
        );
    }
    for b in &report.baselines {
        println!("baseline {:<5} {:.4e} J", b.weather, b.total_energy_j());
    }
    println!("wrote {}", report.csv_path.display());
    Ok(())
}
