use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, MaskEncoding};
use super::ledger::{csv_err, GenerationStats, Provenance, RunLedger, Scheme, TickDecision, TickRecord};
use super::receiver::{centroid, Receiver};
use super::svg::energy_chart;
use crate::error::{Error, Result};
use crate::sampling::{resize_map, Decision, SamplerState};
use crate::scene::{encode_frame, encode_mask, generate_stream, reference_frame, scale_to_geometry, Weather};

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance::new(cfg.hash(), cfg.seed)
}

/// Conventional transmission: every frame of the configured weather is sent.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<RunLedger> {
    run_baseline_as(cfg, cfg.scene.weather, provenance(cfg))
}

/// The baseline under each weather condition, in [`Weather::ALL`] order.
/// All ledgers carry the hash of `cfg` itself.
pub fn run_baselines(cfg: &ExperimentConfig) -> Result<Vec<RunLedger>> {
    Weather::ALL
        .iter()
        .map(|&w| run_baseline_as(cfg, w, provenance(cfg)))
        .collect()
}

fn run_baseline_as(cfg: &ExperimentConfig, weather: Weather, prov: Provenance) -> Result<RunLedger> {
    cfg.validate()?;
    let link = cfg.link()?;
    let mut scene = cfg.scene_config()?;
    scene.weather = weather;
    let encoding = cfg.frame_encoding();
    let mut ledger = RunLedger::new(Scheme::Baseline, weather, cfg.channel.bandwidth_hz, prov);
    for (frame, _) in generate_stream(&scene)? {
        let bytes = encode_frame(&frame, &encoding);
        ledger.push(TickRecord {
            timestamp: frame.timestamp,
            aoi: None,
            change: None,
            voi: None,
            decision: TickDecision::Frame,
            payload_bytes: bytes,
            energy_j: link.energy_for_bytes(bytes),
        });
    }
    Ok(ledger)
}

/// VoI-gated semantic transmission at threshold `voi_threshold`.
///
/// When `diffusion.generation_samples > 0` a receiver is trained first and
/// every delivered map is regenerated; only statistics are kept.
pub fn run_scdgsc(cfg: &ExperimentConfig, voi_threshold: f64) -> Result<RunLedger> {
    cfg.validate()?;
    let receiver = if cfg.diffusion.generation_samples > 0 {
        Some(Receiver::train(cfg)?)
    } else {
        None
    };
    run_scdgsc_with(cfg, voi_threshold, receiver.as_ref())
}

/// As [`run_scdgsc`] with an already trained receiver, or none.
pub fn run_scdgsc_with(
    cfg: &ExperimentConfig,
    voi_threshold: f64,
    receiver: Option<&Receiver>,
) -> Result<RunLedger> {
    cfg.validate()?;
    let link = cfg.link()?;
    let scene = cfg.scene_config()?;
    let factor = cfg.sampler.resize_factor;
    let mut sampler = SamplerState::new(cfg.voi_params(voi_threshold)?);
    let mut ledger = RunLedger::new(
        Scheme::Scdgsc { voi_threshold },
        scene.weather,
        cfg.channel.bandwidth_hz,
        provenance(cfg),
    );
    ledger.reference_energy_j =
        Some(link.energy_for_bytes(encode_frame(&reference_frame(&scene)?, &cfg.frame_encoding())));

    let samples = cfg.diffusion.generation_samples;
    let k = cfg.diffusion.guidance_scale;
    let (mut regenerated, mut err_sum, mut reliable) = (0usize, 0.0, true);

    for (_, mask) in generate_stream(&scene)? {
        let map = resize_map(&mask, factor)?;
        let decision = sampler.offer(&map)?;
        let score = decision.score();
        let bytes = if decision.transmits() {
            match cfg.payload.mask_encoding {
                MaskEncoding::Rle => encode_mask(&map)?.len() as u64,
                MaskEncoding::Tabulated => {
                    scale_to_geometry(cfg.payload.mask_bytes_at_128x96, map.width(), map.height())
                }
            }
        } else {
            0
        };
        if let (Some(rx), true) = (receiver, decision.transmits()) {
            let seed = cfg.seed ^ map.timestamp().wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let (guess, ok) = rx.regenerate(&map, k, samples, seed)?;
            let truth = centroid(&map);
            err_sum += ((guess[0] - truth[0]).powi(2) + (guess[1] - truth[1]).powi(2)).sqrt();
            regenerated += 1;
            reliable &= ok;
        }
        ledger.push(TickRecord {
            timestamp: map.timestamp(),
            aoi: score.map(|s| s.aoi),
            change: score.map(|s| s.change),
            voi: score.map(|s| s.value),
            decision: match decision {
                Decision::Prime => TickDecision::Prime,
                Decision::Transmit(_) => TickDecision::Transmit,
                Decision::Discard(_) => TickDecision::Discard,
            },
            payload_bytes: bytes,
            energy_j: if bytes > 0 { link.energy_for_bytes(bytes) } else { 0.0 },
        });
    }

    if receiver.is_some() {
        ledger.generation = Some(GenerationStats {
            maps: regenerated,
            samples_per_map: samples,
            guidance_scale: k,
            mean_centroid_error: if regenerated > 0 { err_sum / regenerated as f64 } else { 0.0 },
            guidance_reliable: reliable,
        });
    }
    Ok(ledger)
}

/// One row of `energy_vs_threshold.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: &'static str,
    pub weather: Weather,
    /// Empty for baseline and reference rows.
    pub voi_threshold: Option<f64>,
    pub ticks: usize,
    pub transmits: usize,
    pub bytes: u64,
    pub joules: f64,
    pub bandwidth_hz: f64,
    pub config_hash: String,
}

impl SweepRow {
    pub fn from_ledger(l: &RunLedger) -> Self {
        Self {
            scheme: l.scheme.name(),
            weather: l.weather,
            voi_threshold: l.voi_threshold(),
            ticks: l.ticks(),
            transmits: l.transmit_count(),
            bytes: l.total_bytes(),
            joules: l.total_energy_j(),
            bandwidth_hz: l.bandwidth_hz,
            config_hash: l.provenance.config_hash.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub scdgsc: Vec<RunLedger>,
    pub baselines: Vec<RunLedger>,
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

/// Fails early if `dir` cannot be created or written.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Runs every configured threshold plus the four-weather baseline and
/// writes the summary CSV, the chart and one ledger per run into `out`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    ensure_writable(out)?;
    let receiver = if cfg.diffusion.generation_samples > 0 {
        Some(Receiver::train(cfg)?)
    } else {
        None
    };
    let scdgsc = cfg
        .sweep
        .voi_thresholds
        .iter()
        .map(|&th| run_scdgsc_with(cfg, th, receiver.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let baselines = run_baselines(cfg)?;

    let mut rows: Vec<SweepRow> = scdgsc.iter().chain(&baselines).map(SweepRow::from_ledger).collect();
    if let Some(first) = scdgsc.first() {
        let e = first.reference_energy_j.unwrap_or(0.0);
        let bytes = scale_reference_bytes(cfg);
        rows.push(SweepRow {
            scheme: "reference",
            weather: first.weather,
            voi_threshold: None,
            ticks: 0,
            transmits: 1,
            bytes,
            joules: e,
            bandwidth_hz: cfg.channel.bandwidth_hz,
            config_hash: first.provenance.config_hash.clone(),
        });
    }

    for (i, l) in scdgsc.iter().enumerate() {
        l.write_csv(&out.join(format!("ledger_scdgsc_{i:02}.csv")))?;
    }
    for l in &baselines {
        l.write_csv(&out.join(format!("ledger_baseline_{}.csv", l.weather)))?;
    }

    let csv_path = out.join("energy_vs_threshold.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let svg_path = out.join("energy_vs_threshold.svg");
    std::fs::write(&svg_path, energy_chart(&scdgsc, &baselines))
        .map_err(|e| Error::io(&svg_path, e))?;

    Ok(SweepReport {
        scdgsc,
        baselines,
        rows,
        csv_path,
        svg_path,
    })
}

fn scale_reference_bytes(cfg: &ExperimentConfig) -> u64 {
    let scene = cfg.scene_config().expect("validated");
    let frame = reference_frame(&scene).expect("validated");
    encode_frame(&frame, &cfg.frame_encoding())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.scene.width_px = 32;
        cfg.scene.height_px = 24;
        cfg.scene.duration_ticks = 60;
        cfg
    }

    #[test]
    fn zero_threshold_sends_every_map() {
        let l = run_scdgsc(&small(), 0.0).unwrap();
        assert_eq!(l.transmit_count(), 60);
        assert_eq!(l.records()[0].decision, TickDecision::Prime);
    }

    #[test]
    fn discarded_ticks_cost_nothing() {
        let l = run_scdgsc(&small(), 0.5).unwrap();
        for r in l.records() {
            assert_eq!(r.decision == TickDecision::Discard, r.energy_j == 0.0);
            assert_eq!(r.decision == TickDecision::Discard, r.payload_bytes == 0);
        }
    }

    #[test]
    fn tabulated_mask_size_scales_with_geometry() {
        let mut cfg = small();
        cfg.payload.mask_encoding = MaskEncoding::Tabulated;
        let l = run_scdgsc(&cfg, 0.0).unwrap();
        assert_eq!(l.records()[0].payload_bytes, scale_to_geometry(5_000, 32, 24));
    }

    #[test]
    fn unwritable_output_fails_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("not_a_dir");
        std::fs::write(&file, b"x").unwrap();
        let err = sweep(&small(), &file.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }
}
