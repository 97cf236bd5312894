use num_complex::Complex64;

use crate::error::{Error, Result};

/// Marker trajectories: `N` frames of `M` markers with `D` coordinates each,
/// stored frame-major. Occluded samples are `NaN` until [`fill_gaps`] runs.
///
/// [`fill_gaps`]: crate::dsp::fill_gaps
#[derive(Clone, Debug, PartialEq)]
pub struct MoCapStream {
    pub t: Vec<f64>,
    pub markers: Vec<String>,
    pub dims: usize,
    /// Nominal capture rate in Hz.
    pub rate: f64,
    pub data: Vec<f64>,
}

impl MoCapStream {
    pub fn new(t: Vec<f64>, markers: Vec<String>, dims: usize, rate: f64, data: Vec<f64>) -> Result<Self> {
        let s = Self {
            t,
            markers,
            dims,
            rate,
            data,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.markers.is_empty() || self.dims == 0 {
            return Err(Error::Data("mocap stream needs at least one marker and one dimension".into()));
        }
        if !(self.rate > 0.0) {
            return Err(Error::Data(format!("mocap rate must be positive, got {}", self.rate)));
        }
        let need = self.t.len() * self.markers.len() * self.dims;
        if self.data.len() != need {
            return Err(Error::Data(format!(
                "mocap data has {} values, expected {need} ({} frames x {} markers x {} dims)",
                self.data.len(),
                self.t.len(),
                self.markers.len(),
                self.dims
            )));
        }
        check_increasing(&self.t, "mocap")
    }

    pub fn frames(&self) -> usize {
        self.t.len()
    }

    pub fn n_markers(&self) -> usize {
        self.markers.len()
    }

    pub fn frame_len(&self) -> usize {
        self.markers.len() * self.dims
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let k = self.frame_len();
        &self.data[i * k..(i + 1) * k]
    }

    pub fn has_gaps(&self) -> bool {
        self.data.iter().any(|v| v.is_nan())
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Complex baseband radar samples with their timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarSignal {
    pub t: Vec<f64>,
    pub iq: Vec<Complex64>,
    /// Sample rate in Hz.
    pub rate: f64,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
}

impl RadarSignal {
    pub fn new(t: Vec<f64>, iq: Vec<Complex64>, rate: f64, carrier_hz: f64) -> Result<Self> {
        let s = Self {
            t,
            iq,
            rate,
            carrier_hz,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks lengths, ordering and that every sample interval is `1/rate`
    /// within 1 ppm.
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            return Err(Error::Data(format!("radar rate must be positive, got {}", self.rate)));
        }
        if self.t.len() != self.iq.len() {
            return Err(Error::Data(format!(
                "radar has {} timestamps but {} samples",
                self.t.len(),
                self.iq.len()
            )));
        }
        check_increasing(&self.t, "radar")?;
        let period = 1.0 / self.rate;
        for (i, w) in self.t.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if ((dt - period) / period).abs() > 1e-6 {
                return Err(Error::Data(format!(
                    "radar sample interval {dt} s at index {i} deviates from 1/{} s by more than 1 ppm",
                    self.rate
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.iq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iq.is_empty()
    }
}

fn check_increasing(t: &[f64], what: &str) -> Result<()> {
    if let Some(i) = t.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what} timestamp {i} is not finite")));
    }
    if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!(
            "{what} timestamps not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}
