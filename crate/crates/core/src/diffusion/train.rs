//! Simplified denoising objective and mini-batch training.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::denoiser::{Condition, Denoiser, NoisePredictor};
use super::process::forward_marginal;
use super::schedule::VarianceSchedule;
use crate::error::{Error, Result};

/// One clean sample and its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub x0: Vec<f64>,
    pub cond: Condition,
}

/// The step and noise used to corrupt one item.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub step: usize,
    pub eps: Vec<f64>,
}

impl NoiseDraw {
    pub fn sample<R: Rng + ?Sized>(dim: usize, sched: &VarianceSchedule, rng: &mut R) -> Self {
        let step = rng.random_range(1..=sched.steps());
        let eps = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        Self { step, eps }
    }
}

/// Mean squared noise-prediction error for fixed draws, optionally adding
/// its gradient into the denoiser's buffers.
pub fn loss_with_draws(
    batch: &[TrainingItem],
    draws: &[NoiseDraw],
    den: &mut Denoiser,
    sched: &VarianceSchedule,
    accumulate: bool,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Contract("denoising loss needs a non-empty batch".into()));
    }
    if batch.len() != draws.len() {
        return Err(Error::Contract("one noise draw per batch item required".into()));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (item, draw) in batch.iter().zip(draws) {
        let x_n = forward_marginal(&item.x0, draw.step, &draw.eps, sched)?;
        let trace = den.forward_trace(&x_n, &item.cond, draw.step, sched.steps());
        let pred = trace.output();
        let mut d_out = Vec::with_capacity(pred.len());
        for (e, p) in draw.eps.iter().zip(pred) {
            let r = p - e;
            total += r * r;
            d_out.push(2.0 * r * inv_b);
        }
        if accumulate {
            den.backward(&trace, &d_out);
        }
    }
    Ok(total * inv_b)
}

/// Draws a step and noise per item, returns the batch loss and leaves its
/// gradient in the denoiser (previous gradients are cleared).
pub fn denoising_loss<R: Rng + ?Sized>(
    batch: &[TrainingItem],
    den: &mut Denoiser,
    sched: &VarianceSchedule,
    rng: &mut R,
) -> Result<f64> {
    let dim = den.config().data_dim;
    let draws: Vec<NoiseDraw> = batch
        .iter()
        .map(|_| NoiseDraw::sample(dim, sched, rng))
        .collect();
    den.zero_grads();
    loss_with_draws(batch, &draws, den, sched, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Chance of swapping an item's semantic input for the null label.
    pub null_prob: f64,
    /// Leading items of the dataset re-scored with fixed noise after every epoch.
    pub probe_size: usize,
    /// Learning rate at the last step as a fraction of `lr`; cosine in between.
    pub final_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 64,
            lr: 2e-3,
            null_prob: 0.1,
            probe_size: 512,
            final_lr_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Loss on a probe set whose noise draws are fixed before training.
    pub probe_loss: Vec<f64>,
    pub null_label_trained: bool,
}

impl TrainReport {
    /// `epoch,mean_loss` rows, epochs numbered from 1.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, l) in self.epoch_loss.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Adam on the denoising loss with random null-label dropout of the semantic input.
pub fn train<R: Rng + ?Sized>(
    dataset: &[TrainingItem],
    den: &mut Denoiser,
    sched: &VarianceSchedule,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    if !(0.0..1.0).contains(&cfg.null_prob) {
        return Err(Error::config("diffusion.null_prob", "must lie in [0, 1)"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("diffusion.batch_size", "must be >= 1"));
    }
    if !(cfg.lr.is_finite() && cfg.lr >= 0.0) {
        return Err(Error::config("diffusion.lr", "must be finite and >= 0"));
    }
    let dim = den.config().data_dim;

    let probe: Vec<TrainingItem> = dataset.iter().take(cfg.probe_size).cloned().collect();
    let probe_draws: Vec<NoiseDraw> = probe
        .iter()
        .map(|_| NoiseDraw::sample(dim, sched, rng))
        .collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut adam = Adam::new(den.params().len());
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        probe_loss: Vec::with_capacity(cfg.epochs),
        null_label_trained: false,
    };
    let mut saw_null = false;
    let total_steps = cfg.epochs * dataset.len().div_ceil(cfg.batch_size);
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingItem> = chunk
                .iter()
                .map(|&i| {
                    let item = &dataset[i];
                    if cfg.null_prob > 0.0 && rng.random::<f64>() < cfg.null_prob {
                        saw_null = true;
                        TrainingItem {
                            x0: item.x0.clone(),
                            cond: item.cond.nulled(),
                        }
                    } else {
                        item.clone()
                    }
                })
                .collect();
            let loss = denoising_loss(&batch, den, sched, rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let grads = den.grads().to_vec();
            let progress = step as f64 / total_steps.max(2).saturating_sub(1) as f64;
            let floor = cfg.final_lr_fraction;
            let lr = cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            adam.step(den.params_mut(), &grads, lr);
            step += 1;
            sum += loss;
            batches += 1;
        }
        report.epoch_loss.push(sum / batches as f64);
        let probe_loss = if probe.is_empty() {
            f64::NAN
        } else {
            loss_with_draws(&probe, &probe_draws, den, sched, false)?
        };
        report.probe_loss.push(probe_loss);
    }

    report.null_label_trained = saw_null && cfg.lr > 0.0;
    den.set_null_trained(report.null_label_trained || NoisePredictor::null_label_trained(den));
    Ok(report)
}
