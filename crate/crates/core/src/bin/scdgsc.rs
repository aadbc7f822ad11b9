use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scdgsc::pipeline::{self, runner::ensure_writable, ExperimentConfig, VerifyOptions};
use scdgsc::scene::{generate_stream, mask_to_pgm, reference_frame};
use scdgsc::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Semantic-change-driven generative semantic communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `sampler.voi_threshold`.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One VoI-gated run at the configured threshold.
    Run(Common),
    /// Energy against VoI threshold, plus the full-image baselines.
    Sweep(Common),
    /// Full-image transmission under every weather condition.
    Baseline(Common),
    /// Runs the invariant suite; exits nonzero on any failure.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Only run checks whose name contains this text.
        #[arg(long)]
        only: Option<String>,
    },
    /// Writes the reference view, frames and masks as PGM images.
    GenScene {
        #[command(flatten)]
        common: Common,
        /// Export every n-th tick.
        #[arg(long, default_value_t = 1)]
        every: u64,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.threshold {
        cfg.sampler.voi_threshold = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            ensure_writable(&cfg.output_dir)?;
            let l = pipeline::run_scdgsc(&cfg, cfg.sampler.voi_threshold)?;
            let path = cfg.output_dir.join("ledger_run.csv");
            l.write_csv(&path)?;
            println!(
                "threshold={} ticks={} transmits={} bytes={} joules={:e} reference_joules={:e}",
                cfg.sampler.voi_threshold,
                l.ticks(),
                l.transmit_count(),
                l.total_bytes(),
                l.total_energy_j(),
                l.reference_energy_j.unwrap_or(0.0)
            );
            if let Some(g) = &l.generation {
                println!(
                    "regenerated {} maps, mean centroid error {:.4}, guidance reliable: {}",
                    g.maps, g.mean_centroid_error, g.guidance_reliable
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let report = pipeline::sweep(&cfg, &cfg.output_dir)?;
            for r in &report.rows {
                let th = r.voi_threshold.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
                println!(
                    "{:<9} {:<5} threshold={:<5} transmits={:<4} bytes={:<10} joules={:e}",
                    r.scheme, r.weather, th, r.transmits, r.bytes, r.joules
                );
            }
            println!("wrote {} and {}", report.csv_path.display(), report.svg_path.display());
        }
        Command::Baseline(c) => {
            let cfg = load(&c)?;
            ensure_writable(&cfg.output_dir)?;
            for l in pipeline::run_baselines(&cfg)? {
                let path = cfg.output_dir.join(format!("ledger_baseline_{}.csv", l.weather));
                l.write_csv(&path)?;
                println!(
                    "{:<5} ticks={} bytes={} joules={:e}",
                    l.weather,
                    l.ticks(),
                    l.total_bytes(),
                    l.total_energy_j()
                );
            }
        }
        Command::Verify { common, only } => {
            let cfg = load(&common)?;
            ensure_writable(&cfg.output_dir)?;
            let opts = VerifyOptions { filter: only, ..VerifyOptions::default() };
            let report = pipeline::verify(&cfg, &opts)?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            let path = cfg.output_dir.join("verify_report.csv");
            report.write_csv(&path)?;
            println!("wrote {}", path.display());
            return Ok(report.all_passed());
        }
        Command::GenScene { common, every } => {
            let cfg = load(&common)?;
            let dir = cfg.output_dir.join("scene");
            ensure_writable(&dir)?;
            let scene = cfg.scene_config()?;
            write(&dir.join("reference.pgm"), &reference_frame(&scene)?.to_pgm())?;
            let mut n = 0;
            for (frame, mask) in generate_stream(&scene)? {
                if frame.timestamp % every.max(1) == 0 {
                    write(&dir.join(format!("frame_{:05}.pgm", frame.timestamp)), &frame.to_pgm())?;
                    write(&dir.join(format!("mask_{:05}.pgm", frame.timestamp)), &mask_to_pgm(&mask))?;
                    n += 1;
                }
            }
            println!("wrote reference and {n} frame/mask pairs to {}", dir.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
