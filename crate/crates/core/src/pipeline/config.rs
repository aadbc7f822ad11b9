//! TOML experiment configuration. Physical quantities carry units in their keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{Link, LinkBudget};
use crate::diffusion::{TrainConfig, VarianceSchedule};
use crate::error::{Error, Result};
use crate::sampling::VoiParams;
use crate::scene::{FrameEncoding, ObjectSpec, SceneConfig, TabulatedSizes, Weather, TABULATED_MASK_BYTES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Where artifacts are written; not part of the config hash.
    pub output_dir: PathBuf,
    pub scene: SceneSection,
    pub sampler: SamplerSection,
    pub channel: ChannelSection,
    pub payload: PayloadSection,
    pub diffusion: DiffusionSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub width_px: usize,
    pub height_px: usize,
    pub duration_ticks: u64,
    pub weather: Weather,
    pub num_objects: usize,
    pub max_speed_px_per_tick: f64,
    /// Explicit objects; when empty, `num_objects` are drawn from the seed.
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub voi_threshold: f64,
    pub tau_aoi: f64,
    pub tau_change: f64,
    pub resize_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub multipath_m: f64,
    pub shadowing_m_s: f64,
    pub bandwidth_hz: f64,
    pub snr_threshold_db: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskEncoding {
    /// Actual run-length payload of each map.
    Rle,
    /// Measured JPEG size of a map, scaled to geometry.
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMode {
    Tabulated,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadSection {
    pub frame_encoding: FrameMode,
    pub mask_encoding: MaskEncoding,
    pub frame_bytes_at_128x96: TabulatedSizes,
    pub mask_bytes_at_128x96: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub guidance_scale: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub null_prob: f64,
    /// Samples drawn per delivered map at the receiver; 0 disables regeneration.
    pub generation_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub voi_thresholds: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("out"),
            scene: SceneSection::default(),
            sampler: SamplerSection::default(),
            channel: ChannelSection::default(),
            payload: PayloadSection::default(),
            diffusion: DiffusionSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            width_px: 128,
            height_px: 96,
            duration_ticks: 500,
            weather: Weather::Clear,
            num_objects: 3,
            max_speed_px_per_tick: 1.5,
            objects: Vec::new(),
        }
    }
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            voi_threshold: 0.1,
            tau_aoi: 0.0,
            tau_change: 1.0,
            resize_factor: 1,
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            multipath_m: 6.0,
            shadowing_m_s: 6.0,
            bandwidth_hz: 1e6,
            snr_threshold_db: 15.0,
            noise_psd_dbm_per_hz: -90.0,
            distance_m: 100.0,
        }
    }
}

impl Default for PayloadSection {
    fn default() -> Self {
        Self {
            frame_encoding: FrameMode::Tabulated,
            mask_encoding: MaskEncoding::Rle,
            frame_bytes_at_128x96: TabulatedSizes::MEASURED,
            mask_bytes_at_128x96: TABULATED_MASK_BYTES,
        }
    }
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: 50,
            beta_min: 2e-3,
            beta_max: 0.4,
            guidance_scale: 4.0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.lr,
            null_prob: t.null_prob,
            generation_samples: 0,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            voi_thresholds: vec![0.0, 0.1, 0.2, 0.4, 0.8],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form,
    /// with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        self.scene_config()?;
        self.voi_params(self.sampler.voi_threshold)?;
        let (w, h, f) = (self.scene.width_px, self.scene.height_px, self.sampler.resize_factor);
        if f == 0 || !w.is_multiple_of(f) || !h.is_multiple_of(f) {
            return Err(Error::config(
                "sampler.resize_factor",
                format!("{f} must divide the frame size {w}x{h}"),
            ));
        }
        self.link()?;
        self.schedule()?;
        let d = &self.diffusion;
        if !(d.guidance_scale.is_finite() && d.guidance_scale >= 0.0) {
            return Err(Error::config("diffusion.guidance_scale", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&d.null_prob) {
            return Err(Error::config("diffusion.null_prob", "must lie in [0, 1)"));
        }
        if !(d.learning_rate.is_finite() && d.learning_rate >= 0.0) {
            return Err(Error::config("diffusion.learning_rate", "must be finite and >= 0"));
        }
        if d.batch_size == 0 {
            return Err(Error::config("diffusion.batch_size", "must be >= 1"));
        }
        let th = &self.sweep.voi_thresholds;
        if th.is_empty() {
            return Err(Error::config("sweep.voi_thresholds", "must not be empty"));
        }
        if th.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("sweep.voi_thresholds", "must be sorted ascending"));
        }
        if let Some(bad) = th.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::config("sweep.voi_thresholds", format!("{bad} is not a valid threshold")));
        }
        Ok(())
    }

    pub fn scene_config(&self) -> Result<SceneConfig> {
        let s = &self.scene;
        if s.width_px == 0 || s.height_px == 0 {
            return Err(Error::config(
                "scene.width_px/height_px",
                format!("frame must be non-empty, got {}x{}", s.width_px, s.height_px),
            ));
        }
        if !(s.max_speed_px_per_tick.is_finite() && s.max_speed_px_per_tick >= 0.0) {
            return Err(Error::config("scene.max_speed_px_per_tick", "must be finite and >= 0"));
        }
        let mut cfg = if s.objects.is_empty() {
            SceneConfig::with_random_objects(
                s.width_px,
                s.height_px,
                s.num_objects,
                s.max_speed_px_per_tick,
                s.duration_ticks,
                self.seed,
            )?
        } else {
            SceneConfig {
                width: s.width_px,
                height: s.height_px,
                duration: s.duration_ticks,
                weather: s.weather,
                seed: self.seed,
                objects: s.objects.clone(),
            }
        };
        cfg.weather = s.weather;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn voi_params(&self, threshold: f64) -> Result<VoiParams> {
        VoiParams::new(threshold, self.sampler.tau_aoi, self.sampler.tau_change)
            .map_err(|e| in_section("sampler", e))
    }

    pub fn link(&self) -> Result<Link> {
        let c = &self.channel;
        let budget = LinkBudget::from_db(
            c.bandwidth_hz,
            c.snr_threshold_db,
            c.noise_psd_dbm_per_hz,
            c.distance_m,
        )
        .map_err(|e| in_section("channel", e))?;
        Link::from_budget(c.multipath_m, c.shadowing_m_s, budget).map_err(|e| match e {
            Error::Domain(reason) => Error::config("channel.multipath_m/shadowing_m_s", reason),
            other => other,
        })
    }

    pub fn frame_encoding(&self) -> FrameEncoding {
        match self.payload.frame_encoding {
            FrameMode::Tabulated => FrameEncoding::Tabulated(self.payload.frame_bytes_at_128x96),
            FrameMode::Raw => FrameEncoding::Raw,
        }
    }

    pub fn schedule(&self) -> Result<VarianceSchedule> {
        let d = &self.diffusion;
        VarianceSchedule::linear(d.steps, d.beta_min, d.beta_max)
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = &self.diffusion;
        TrainConfig {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.learning_rate,
            null_prob: d.null_prob,
            ..TrainConfig::default()
        }
    }
}

fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, reason } if !field.contains('.') => {
            Error::config(format!("{section}.{field}"), reason)
        }
        other => other,
    }
}
