//! Spatiotemporal transformer mapping one MoCap window to one Doppler
//! spectrum.
//!
//! A spatial encoder attends across markers within each frame, a temporal
//! encoder attends across frames for each marker, a cross-attention stage
//! lets the temporal features query the spatial ones, and an MLP head with a
//! softplus produces `W` nonnegative bins. [`Variant`] selects the full
//! model or one of the two single-stack ablations.

mod checkpoint;
mod config;
mod layers;
mod params;
mod stt;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Variant};
pub use params::ParamStore;
pub use stt::{Bound, Mode, SttModel};
