//! Simulator for semantic-change-driven generative semantic communication.
//!
//! A monitoring source segments each captured frame into a binary semantic
//! map, scores it by value of information against the last map it sent, and
//! transmits only maps that clear a threshold. The link is an F-composite
//! fading channel under power control, so every payload byte has an energy
//! cost. The receiver regenerates the scene with a conditional denoising
//! diffusion model guided by the map and a locally held reference view.
//!
//! Modules:
//! - [`channel`]: fading law, moments, power control and payload energy
//! - [`sampling`]: semantic maps, change degree, VoI gate
//! - [`scene`]: synthetic scene stream and payload encodings
//! - [`diffusion`]: schedules, forward/posterior maths, guided sampling,
//!   and a small trainable denoiser
//! - [`pipeline`]: configs, experiment runs, sweeps and the verification suite

pub mod channel;
pub mod diffusion;
pub mod error;
pub mod pipeline;
pub mod quadrature;
pub mod sampling;
pub mod scene;

pub use error::{Error, Result};
