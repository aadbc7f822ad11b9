//! Conditional denoising diffusion at desk scale.
//!
//! The forward chain adds Gaussian noise under a fixed variance schedule; the
//! reverse chain uses a learned noise predictor plugged into the closed-form
//! forward posterior. Guidance mixes conditional and null-label predictions.

mod denoiser;
mod process;
mod sample;
mod schedule;
pub mod toy;
mod train;

pub use denoiser::{Condition, Denoiser, DenoiserConfig, NoisePredictor};
pub use process::{
    cfg_combine, forward_marginal, forward_step, posterior_mean_from_x0, posterior_params,
};
pub use sample::{sample, sample_from, Generated};
pub use schedule::VarianceSchedule;
pub use train::{
    denoising_loss, loss_with_draws, train, NoiseDraw, TrainConfig, TrainReport, TrainingItem,
};
