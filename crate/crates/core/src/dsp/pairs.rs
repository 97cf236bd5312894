use serde::{Deserialize, Serialize};

use crate::dsp::{
    center_shift, compress_sqrt, fill_gaps, interpolate_at, stft_density, MoCapStream,
    RadarSignal, Taper,
};
use crate::error::{Error, Result};

/// Shared windowing parameters for the MoCap segmentation and the radar STFT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Window length `W` in samples; also the number of frequency bins.
    pub window: usize,
    /// Hop `H` in samples.
    pub hop: usize,
    /// Native MoCap rate in Hz.
    pub mocap_rate: f64,
    /// Radar rate in Hz; MoCap is resampled onto this clock.
    pub radar_rate: f64,
    pub taper: Taper,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window: 256,
            hop: 64,
            mocap_rate: 250.0,
            radar_rate: 256.0,
            taper: Taper::Rectangular,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 || self.hop > self.window {
            return Err(Error::Config(format!(
                "need 1 <= hop <= window, got window={} hop={}",
                self.window, self.hop
            )));
        }
        if !(self.mocap_rate > 0.0 && self.radar_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rates must be positive, got mocap={} radar={}",
                self.mocap_rate, self.radar_rate
            )));
        }
        Ok(())
    }

    /// Frequency resolution `F_r / W` in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.radar_rate / self.window as f64
    }
}

/// `⌊(N − W)/H⌋ + 1`.
pub fn window_count(n: usize, window: usize, hop: usize) -> Result<usize> {
    if window == 0 || hop == 0 {
        return Err(Error::Config(format!("window={window} and hop={hop} must be positive")));
    }
    if n < window {
        return Err(Error::Data(format!(
            "stream of {n} samples is shorter than the window length {window}"
        )));
    }
    Ok((n - window) / hop + 1)
}

/// Cuts a frame-major stream (`frame_len` values per sample) into windows of
/// `window` samples every `hop` samples. Returns the stacked windows and
/// their start indices; a trailing remainder shorter than a window is
/// dropped.
pub fn segment_windows(
    data: &[f64],
    frame_len: usize,
    window: usize,
    hop: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if frame_len == 0 || data.len() % frame_len != 0 {
        return Err(Error::Dimension(format!(
            "{} values do not split into frames of {frame_len}",
            data.len()
        )));
    }
    let n = data.len() / frame_len;
    let count = window_count(n, window, hop)?;
    let starts: Vec<usize> = (0..count).map(|t| t * hop).collect();
    let mut out = Vec::with_capacity(count * window * frame_len);
    for &s in &starts {
        out.extend_from_slice(&data[s * frame_len..(s + window) * frame_len]);
    }
    Ok((out, starts))
}

/// Supervised examples: `T` MoCap windows (`W × M × D`) and their `F = W`
/// bin spectra.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedPairs {
    pub cfg: PreprocessConfig,
    pub markers: usize,
    pub dims: usize,
    /// `T × W × M × D`.
    pub mocap: Vec<f64>,
    /// `T × F`, nonnegative.
    pub spec: Vec<f64>,
    /// First radar sample of each window, relative to the paired span.
    pub starts: Vec<usize>,
}

impl WindowedPairs {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn window(&self) -> usize {
        self.cfg.window
    }

    pub fn bins(&self) -> usize {
        self.cfg.window
    }

    pub fn input_len(&self) -> usize {
        self.cfg.window * self.markers * self.dims
    }

    pub fn input(&self, t: usize) -> &[f64] {
        let k = self.input_len();
        &self.mocap[t * k..(t + 1) * k]
    }

    pub fn target(&self, t: usize) -> &[f64] {
        let f = self.bins();
        &self.spec[t * f..(t + 1) * f]
    }

    /// Checks every array length against `(T, W, M, D, F)`.
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        let t = self.len();
        if self.mocap.len() != t * self.input_len() || self.spec.len() != t * self.bins() {
            return Err(Error::Dimension(format!(
                "pairs arrays ({} mocap, {} spec values) do not match T={t} W={} M={} D={}",
                self.mocap.len(),
                self.spec.len(),
                self.cfg.window,
                self.markers,
                self.dims
            )));
        }
        if self.spec.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Data("spectrogram targets must be nonnegative".into()));
        }
        Ok(())
    }

    /// Appends the windows of several recordings that share one
    /// configuration and geometry. Start indices stay relative to their own
    /// recording.
    pub fn concat(parts: &[WindowedPairs]) -> Result<WindowedPairs> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Data("nothing to concatenate".into()))?;
        let mut out = first.subset(&[]);
        for p in parts {
            if p.cfg != first.cfg || (p.markers, p.dims) != (first.markers, first.dims) {
                return Err(Error::Data(format!(
                    "cannot concatenate pairs with M={} D={} {:?} and M={} D={} {:?}",
                    first.markers, first.dims, first.cfg, p.markers, p.dims, p.cfg
                )));
            }
            out.mocap.extend_from_slice(&p.mocap);
            out.spec.extend_from_slice(&p.spec);
            out.starts.extend_from_slice(&p.starts);
        }
        Ok(out)
    }

    /// The windows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> WindowedPairs {
        let mut mocap = Vec::with_capacity(indices.len() * self.input_len());
        let mut spec = Vec::with_capacity(indices.len() * self.bins());
        for &i in indices {
            mocap.extend_from_slice(self.input(i));
            spec.extend_from_slice(self.target(i));
        }
        WindowedPairs {
            cfg: self.cfg.clone(),
            markers: self.markers,
            dims: self.dims,
            mocap,
            spec,
            starts: indices.iter().map(|&i| self.starts[i]).collect(),
        }
    }
}

/// Pairs aligned MoCap and radar streams into supervised windows.
///
/// Both streams must already share a clock (see [`crate::io::align`]). Radar
/// samples inside the common span define the time grid; MoCap is gap-filled
/// and linearly interpolated onto it, then both are cut with the same
/// `(W, H)`. Row `t` of the spectrogram target belongs to MoCap window `t`.
pub fn build_pairs(
    mocap: &MoCapStream,
    radar: &RadarSignal,
    cfg: &PreprocessConfig,
) -> Result<WindowedPairs> {
    cfg.validate()?;
    if ((radar.rate - cfg.radar_rate) / cfg.radar_rate).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "radar stream is sampled at {} Hz but the configuration expects {} Hz",
            radar.rate, cfg.radar_rate
        )));
    }
    if mocap.frames() < 2 || radar.is_empty() {
        return Err(Error::Data("insufficient overlap: a stream is empty".into()));
    }
    let filled;
    let mocap = if mocap.has_gaps() {
        filled = fill_gaps(mocap)?.0;
        &filled
    } else {
        mocap
    };

    let lo = mocap.t[0].max(radar.t[0]);
    let hi = mocap.t[mocap.frames() - 1].min(radar.t[radar.len() - 1]);
    let tol = 1e-9 / cfg.radar_rate;
    let first = radar.t.partition_point(|&t| t < lo - tol);
    let end = radar.t.partition_point(|&t| t <= hi + tol);
    let n = end.saturating_sub(first);
    if n < cfg.window {
        return Err(Error::Data(format!(
            "insufficient overlap: {n} radar samples ({:.4} s) in the common span, need window {} ({:.4} s)",
            n as f64 / cfg.radar_rate,
            cfg.window,
            cfg.window as f64 / cfg.radar_rate
        )));
    }

    let (m0, m1) = (mocap.t[0], mocap.t[mocap.frames() - 1]);
    let times: Vec<f64> = radar.t[first..end].iter().map(|&t| t.clamp(m0, m1)).collect();
    let resampled = interpolate_at(mocap, &times, cfg.radar_rate)?;
    let (windows, starts) =
        segment_windows(&resampled.data, resampled.frame_len(), cfg.window, cfg.hop)?;

    let spec = stft_density(&radar.iq[first..end], cfg)?;
    let spec = compress_sqrt(&center_shift(&spec));
    debug_assert_eq!(spec.frames, starts.len());

    Ok(WindowedPairs {
        cfg: cfg.clone(),
        markers: mocap.n_markers(),
        dims: mocap.dims,
        mocap: windows,
        spec: spec.to_time_major(),
        starts,
    })
}
