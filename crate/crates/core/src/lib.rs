//! Learn single-range-bin Doppler radar spectrograms from motion-capture
//! marker trajectories.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f64` arrays and a reverse-mode differentiation graph
//!   with exactly the operations the model needs.
//! - [`dsp`]: gap filling, resampling, windowing and the density-scaled STFT
//!   that turn paired MoCap/radar streams into supervised windows.
//! - [`model`]: the spatiotemporal transformer (spatial stack, temporal stack,
//!   cross-attention fusion, MLP head) plus its ablation variants and
//!   checkpoint format.
//! - [`train`]: MSE objective, Adam with L2 weight decay, one-cycle learning
//!   rate schedule, epoch loop and the ablation runner.
//! - [`io`]: text formats for MoCap and radar recordings, clock alignment and
//!   the binary pairs container.
//! - [`synth`]: a point-scatterer simulator that produces paired data with
//!   exact Doppler physics, used as a ground-truth oracle.

pub mod dsp;
pub mod error;
pub mod io;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
