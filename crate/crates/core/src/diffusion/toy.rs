//! Two-dimensional conditional Gaussian-mixture task with known conditionals.
//!
//! The semantic condition is a one-hot choice of mixture component and the
//! reference condition is an additive offset, so `x0 | (r, s)` is
//! `N(mu_s + r, std^2 I)`. With zero offset the marginal over the two
//! equally likely components has unit variance per coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::denoiser::{Condition, Denoiser, DenoiserConfig};
use super::sample::sample;
use super::schedule::VarianceSchedule;
use super::train::{train, TrainConfig, TrainReport, TrainingItem};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTask {
    pub means: [[f64; 2]; 2],
    pub std: f64,
    pub offsets: Vec<[f64; 2]>,
}

impl Default for MixtureTask {
    fn default() -> Self {
        let std = 0.2;
        let a = (1.0f64 - std * std).sqrt();
        Self {
            means: [[-a, a], [a, -a]],
            std,
            offsets: vec![[0.0, 0.0], [0.5, 0.5], [-0.5, 0.5], [0.5, -0.5], [-0.5, -0.5]],
        }
    }
}

impl MixtureTask {
    pub fn condition(&self, offset: [f64; 2], component: usize) -> Condition {
        let mut one_hot = vec![0.0; 2];
        one_hot[component] = 1.0;
        Condition::new(offset.to_vec(), one_hot)
    }

    pub fn target_mean(&self, offset: [f64; 2], component: usize) -> [f64; 2] {
        let m = self.means[component];
        [m[0] + offset[0], m[1] + offset[1]]
    }

    pub fn dataset<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<TrainingItem> {
        (0..count)
            .map(|_| {
                let c = rng.random_range(0..2);
                let r = self.offsets[rng.random_range(0..self.offsets.len())];
                let mu = self.target_mean(r, c);
                let x0 = mu
                    .iter()
                    .map(|m| m + self.std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                TrainingItem {
                    x0,
                    cond: self.condition(r, c),
                }
            })
            .collect()
    }
}

/// Everything needed to train and sample the toy task reproducibly.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyExperiment {
    pub task: MixtureTask,
    pub denoiser: DenoiserConfig,
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub train: TrainConfig,
    pub dataset_size: usize,
    pub seed: u64,
}

impl Default for ToyExperiment {
    fn default() -> Self {
        Self {
            task: MixtureTask::default(),
            denoiser: default_toy_denoiser(),
            steps: 50,
            beta_min: 2e-3,
            beta_max: 0.4,
            train: TrainConfig::default(),
            dataset_size: 4096,
            seed: 2024,
        }
    }
}

pub fn default_toy_denoiser() -> DenoiserConfig {
    DenoiserConfig {
        data_dim: 2,
        reference_dim: 2,
        semantic_dim: 2,
        hidden: vec![64, 64],
        time_freqs: 4,
    }
}

/// A trained toy model.
#[derive(Debug, Clone)]
pub struct TrainedToy {
    pub denoiser: Denoiser,
    pub schedule: VarianceSchedule,
    pub report: TrainReport,
}

impl ToyExperiment {
    pub fn schedule(&self) -> Result<VarianceSchedule> {
        VarianceSchedule::linear(self.steps, self.beta_min, self.beta_max)
    }

    pub fn run(&self) -> Result<TrainedToy> {
        let schedule = self.schedule()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let data = self.task.dataset(self.dataset_size, &mut rng);
        let mut denoiser = Denoiser::new(self.denoiser.clone(), self.seed.wrapping_add(1))?;
        let report = train(&data, &mut denoiser, &schedule, &self.train, &mut rng)?;
        Ok(TrainedToy {
            denoiser,
            schedule,
            report,
        })
    }
}

impl TrainedToy {
    /// Mean of `count` guided samples for one condition.
    pub fn sample_mean(&self, cond: &Condition, k: f64, count: usize, seed: u64) -> Result<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = [0.0; 2];
        for _ in 0..count {
            let g = sample(&self.denoiser, cond, k, &self.schedule, &mut rng)?;
            acc[0] += g.x0[0];
            acc[1] += g.x0[1];
        }
        Ok([acc[0] / count as f64, acc[1] / count as f64])
    }
}
