use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{dft, window_count, PreprocessConfig};
use crate::error::{Error, Result};

/// Analysis window applied to each STFT segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    /// Periodic Hann, `0.5 - 0.5·cos(2πn/W)`.
    Hann,
}

impl Taper {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; len],
            Taper::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Complex STFT, `bins × frames`, row-major (row = frequency bin).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn column(&self, frame: usize) -> Vec<Complex64> {
        (0..self.bins).map(|b| self.at(b, frame)).collect()
    }

    /// `Σ_bins |S|²` for one frame.
    pub fn column_energy(&self, frame: usize) -> f64 {
        (0..self.bins).map(|b| self.at(b, frame).norm_sqr()).sum()
    }
}

/// Real spectrogram, `bins × frames`, row-major (row = frequency bin).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    /// Transposed copy, `frames × bins`, so row `t` is the spectrum of
    /// window `t`.
    pub fn to_time_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for t in 0..self.frames {
            out.extend((0..self.bins).map(|b| self.at(b, t)));
        }
        out
    }

    pub fn from_time_major(frames: usize, bins: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), frames * bins);
        let mut data = Vec::with_capacity(rows.len());
        for b in 0..bins {
            data.extend((0..frames).map(|t| rows[t * bins + b]));
        }
        Self { bins, frames, data }
    }
}

/// Two-sided STFT scaled to spectral density.
///
/// Window `t` covers samples `[tH, tH + W)`. Each segment is tapered, run
/// through a `W`-point DFT and divided by `sqrt(F_r · Σw²)`, so that
/// `|S|²` is a power spectral density and `Σ_k |S_k|²·Δf` equals the mean
/// power of the tapered segment.
pub fn stft_density(iq: &[Complex64], cfg: &PreprocessConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    let (w, h) = (cfg.window, cfg.hop);
    if iq.len() < w {
        return Err(Error::Data(format!(
            "signal has {} samples, fewer than the window length {w}",
            iq.len()
        )));
    }
    let frames = window_count(iq.len(), w, h)?;
    let taper = cfg.taper.weights(w);
    let energy: f64 = taper.iter().map(|v| v * v).sum();
    let scale = 1.0 / (cfg.radar_rate * energy).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); w * frames];
    let mut seg = vec![Complex64::new(0.0, 0.0); w];
    for t in 0..frames {
        for (n, s) in seg.iter_mut().enumerate() {
            *s = iq[t * h + n] * taper[n];
        }
        for (k, v) in dft(&seg).into_iter().enumerate() {
            data[k * frames + t] = v * scale;
        }
    }
    Ok(ComplexSpectrogram {
        bins: w,
        frames,
        data,
    })
}

/// Circular row rotation placing zero frequency at row `⌊F/2⌋`, so rows run
/// `-⌊F/2⌋ … ⌈F/2⌉-1` in bin units.
pub fn center_shift(spec: &ComplexSpectrogram) -> ComplexSpectrogram {
    let (f, t) = (spec.bins, spec.frames);
    let mut data = vec![Complex64::new(0.0, 0.0); f * t];
    for k in 0..f {
        let dst = (k + f / 2) % f;
        data[dst * t..(dst + 1) * t].copy_from_slice(&spec.data[k * t..(k + 1) * t]);
    }
    ComplexSpectrogram {
        bins: f,
        frames: t,
        data,
    }
}

/// Elementwise `sqrt(|S|)`.
pub fn compress_sqrt(spec: &ComplexSpectrogram) -> Spectrogram {
    Spectrogram {
        bins: spec.bins,
        frames: spec.frames,
        data: spec.data.iter().map(|v| v.norm().sqrt()).collect(),
    }
}
