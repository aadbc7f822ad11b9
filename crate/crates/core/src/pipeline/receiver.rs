//! Receiver-side regeneration at toy scale.
//!
//! Instead of images, the receiver generates the object centroid of the scene
//! in normalised coordinates. The semantic condition is the delivered map
//! pooled to a 4x4 occupancy grid; the reference condition is the mean
//! intensity of each quadrant of the locally held reference view. Only
//! summary statistics are logged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ExperimentConfig;
use crate::diffusion::{sample, train, Condition, Denoiser, DenoiserConfig, TrainReport, TrainingItem, VarianceSchedule};
use crate::error::Result;
use crate::sampling::{resize_map, SemanticMap};
use crate::scene::{generate_stream, reference_frame, Frame};

const POOL: usize = 4;
const JITTER: f64 = 0.05;

/// Occupancy fraction of each cell of a `POOL x POOL` grid, row-major.
pub fn pooled_occupancy(map: &SemanticMap) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let mut hits = [0usize; POOL * POOL];
    let mut sizes = [0usize; POOL * POOL];
    for y in 0..h {
        for x in 0..w {
            let cell = (y * POOL / h) * POOL + x * POOL / w;
            sizes[cell] += 1;
            hits[cell] += map.get(x, y) as usize;
        }
    }
    hits.iter()
        .zip(&sizes)
        .map(|(&k, &n)| if n == 0 { 0.0 } else { k as f64 / n as f64 })
        .collect()
}

/// Object-pixel centroid mapped to `[-1, 1]^2`; the frame centre when empty.
pub fn centroid(map: &SemanticMap) -> [f64; 2] {
    let (w, h) = (map.width(), map.height());
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            if map.get(x, y) {
                sx += x as f64 + 0.5;
                sy += y as f64 + 0.5;
                n += 1;
            }
        }
    }
    if n == 0 {
        return [0.0, 0.0];
    }
    [2.0 * sx / (n as f64 * w as f64) - 1.0, 2.0 * sy / (n as f64 * h as f64) - 1.0]
}

/// Mean intensity of each image quadrant, scaled to `[0, 1]`.
pub fn quadrant_intensity(frame: &Frame) -> Vec<f64> {
    let (w, h) = (frame.width, frame.height);
    let mut sum = [0.0f64; 4];
    let mut n = [0usize; 4];
    for y in 0..h {
        for x in 0..w {
            let q = (2 * y / h) * 2 + 2 * x / w;
            sum[q] += frame.pixel(x, y) as f64 / 255.0;
            n[q] += 1;
        }
    }
    (0..4).map(|q| if n[q] == 0 { 0.0 } else { sum[q] / n[q] as f64 }).collect()
}

/// A trained receiver and the reference it conditions on.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub denoiser: Denoiser,
    pub schedule: VarianceSchedule,
    pub reference: Vec<f64>,
    pub report: TrainReport,
}

impl Receiver {
    /// Trains on the maps of the configured scene, each paired with its
    /// centroid plus a little jitter.
    pub fn train(cfg: &ExperimentConfig) -> Result<Self> {
        let scene = cfg.scene_config()?;
        let schedule = cfg.schedule()?;
        let reference = quadrant_intensity(&reference_frame(&scene)?);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7265_6365_6976_6572);
        let jitter = Normal::new(0.0, JITTER).expect("positive std");
        let mut data = Vec::new();
        for (_, map) in generate_stream(&scene)? {
            let map = resize_map(&map, cfg.sampler.resize_factor)?;
            let c = centroid(&map);
            data.push(TrainingItem {
                x0: c.iter().map(|v| v + jitter.sample(&mut rng)).collect(),
                cond: Condition::new(reference.clone(), pooled_occupancy(&map)),
            });
        }
        let net = DenoiserConfig {
            data_dim: 2,
            reference_dim: 4,
            semantic_dim: POOL * POOL,
            hidden: vec![64, 64],
            time_freqs: 4,
        };
        let mut denoiser = Denoiser::new(net, cfg.seed)?;
        let report = if data.is_empty() {
            TrainReport::default()
        } else {
            train(&data, &mut denoiser, &schedule, &cfg.train_config(), &mut rng)?
        };
        Ok(Self {
            denoiser,
            schedule,
            reference,
            report,
        })
    }

    /// Mean centroid of `samples` guided generations for one delivered map.
    pub fn regenerate(&self, map: &SemanticMap, k: f64, samples: usize, seed: u64) -> Result<([f64; 2], bool)> {
        let cond = Condition::new(self.reference.clone(), pooled_occupancy(map));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = [0.0; 2];
        let mut reliable = true;
        for _ in 0..samples {
            let g = sample(&self.denoiser, &cond, k, &self.schedule, &mut rng)?;
            acc[0] += g.x0[0];
            acc[1] += g.x0[1];
            reliable &= g.guidance_reliable;
        }
        let n = samples.max(1) as f64;
        Ok(([acc[0] / n, acc[1] / n], reliable))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_and_centroid() {
        let map = SemanticMap::from_fn(8, 8, 0, |x, y| x < 2 && y < 2).unwrap();
        let occ = pooled_occupancy(&map);
        assert_eq!(occ[0], 1.0);
        assert!(occ[1..].iter().all(|&v| v == 0.0));
        let c = centroid(&map);
        assert_eq!(c, [-0.75, -0.75]);
        assert_eq!(centroid(&SemanticMap::empty(8, 8, 0).unwrap()), [0.0, 0.0]);
    }
}
