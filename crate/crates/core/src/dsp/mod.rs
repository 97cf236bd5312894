//! Turning paired MoCap/radar streams into supervised `(window, spectrum)`
//! examples.
//!
//! MoCap is gap-filled and linearly interpolated onto the radar clock, both
//! streams are cut with the same window `W` and hop `H`, and each radar
//! window becomes one row of a density-scaled, zero-centred, square-root
//! compressed spectrogram with `F = W` bins.

mod fft;
mod pairs;
mod resample;
mod stft;
mod stream;

pub use fft::{dft, fft_radix2, naive_dft};
pub use pairs::{build_pairs, segment_windows, window_count, PreprocessConfig, WindowedPairs};
pub use resample::{fill_gaps, interpolate_at, resample_linear, GapReport};
pub use stft::{
    center_shift, compress_sqrt, stft_density, ComplexSpectrogram, Spectrogram, Taper,
};
pub use stream::{MoCapStream, RadarSignal};

pub use num_complex::Complex64;
