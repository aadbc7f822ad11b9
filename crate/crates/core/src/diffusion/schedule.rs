use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-step noise variances and their cumulative signal fractions.
///
/// Steps are 1-based. `alpha_bar(0)` is 1 by convention, which makes the
/// posterior variance of the last reverse step zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl VarianceSchedule {
    /// Betas interpolated linearly from `beta_min` at step 1 to `beta_max` at step `steps`.
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("diffusion.steps", "must be >= 1"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::config(
                "diffusion.beta_min/beta_max",
                format!("need 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"),
            ));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_min
                } else {
                    beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::config("diffusion.betas", "schedule must have at least one step"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::config("diffusion.betas", format!("beta {b} outside (0, 1)")));
        }
        let alpha_bars = cumulative_alpha_bars(&betas);
        Ok(Self { betas, alpha_bars })
    }

    /// Pairs betas with an arbitrary cumulative table, skipping all checks.
    /// Exists so the verification suite can be shown to catch corruption.
    #[doc(hidden)]
    pub fn from_parts_unchecked(betas: Vec<f64>, alpha_bars: Vec<f64>) -> Self {
        Self { betas, alpha_bars }
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n - 1]
    }

    pub fn alpha_bar(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.alpha_bars[n - 1]
        }
    }

    /// Posterior variance `(1 - abar_{n-1}) / (1 - abar_n) * beta_n`.
    pub fn posterior_variance(&self, n: usize) -> f64 {
        (1.0 - self.alpha_bar(n - 1)) / (1.0 - self.alpha_bar(n)) * self.beta(n)
    }

    pub(crate) fn check_step(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.steps() {
            return Err(Error::Contract(format!(
                "diffusion step {n} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Largest gap between the stored cumulative products and a fresh recomputation.
    pub fn consistency_error(&self) -> f64 {
        if self.alpha_bars.len() != self.betas.len() {
            return f64::INFINITY;
        }
        cumulative_alpha_bars(&self.betas)
            .iter()
            .zip(&self.alpha_bars)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Short digest of the betas, used to tie saved weights to a schedule.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        for b in &self.betas {
            h.update(b.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

fn cumulative_alpha_bars(betas: &[f64]) -> Vec<f64> {
    betas
        .iter()
        .scan(1.0, |acc, b| {
            *acc *= 1.0 - b;
            Some(*acc)
        })
        .collect()
}
