//! On-disk formats and stream alignment.
//!
//! - MoCap and radar recordings: comma-separated text with a `key=value`
//!   metadata line and a column header line.
//! - Spectrogram tables: the same text layout with one row per window.
//! - Windowed pairs: a versioned little-endian binary container.
//!
//! The byte-level layouts are documented in `docs/formats.md`. Loaders
//! reject structurally invalid input; repairs such as gap filling happen in
//! [`crate::dsp`].

mod align;
mod pairs_file;
mod text;

pub use align::{align, SyncMark};
pub use pairs_file::{load_pairs, save_pairs, PAIRS_MAGIC, PAIRS_VERSION};
pub use text::{
    load_mocap, load_radar, load_spectrogram, save_mocap, save_radar, save_spectrogram,
    SpectrogramTable, TEXT_FORMAT_VERSION,
};
