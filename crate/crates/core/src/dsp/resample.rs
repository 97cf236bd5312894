use crate::dsp::MoCapStream;
use crate::error::{Error, Result};

/// What [`fill_gaps`] repaired.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GapReport {
    /// Filled marker samples per marker, in header order.
    pub per_marker: Vec<usize>,
}

impl GapReport {
    pub fn total(&self) -> usize {
        self.per_marker.iter().sum()
    }
}

/// Fills occluded marker samples.
///
/// A marker sample is missing when any of its coordinates is `NaN`. Interior
/// gaps are interpolated linearly in time between the surrounding valid
/// samples; leading and trailing gaps hold the nearest valid sample. A marker
/// that is never observed is an error.
pub fn fill_gaps(stream: &MoCapStream) -> Result<(MoCapStream, GapReport)> {
    let (n, m, d) = (stream.frames(), stream.n_markers(), stream.dims);
    let mut out = stream.clone();
    let mut report = GapReport {
        per_marker: vec![0; m],
    };
    let at = |f: usize, k: usize| (f * m + k) * d;
    for k in 0..m {
        let valid: Vec<usize> = (0..n)
            .filter(|&f| stream.data[at(f, k)..at(f, k) + d].iter().all(|v| !v.is_nan()))
            .collect();
        if valid.len() == n {
            continue;
        }
        let (Some(&first), Some(&last)) = (valid.first(), valid.last()) else {
            return Err(Error::Data(format!(
                "marker '{}' has no valid samples",
                stream.markers[k]
            )));
        };
        let mut next = 0;
        for f in 0..n {
            while next < valid.len() && valid[next] < f {
                next += 1;
            }
            if next < valid.len() && valid[next] == f {
                continue;
            }
            report.per_marker[k] += 1;
            let dst = at(f, k);
            if f < first {
                out.data.copy_within(at(first, k)..at(first, k) + d, dst);
            } else if f > last {
                out.data.copy_within(at(last, k)..at(last, k) + d, dst);
            } else {
                let (lo, hi) = (valid[next - 1], valid[next]);
                let frac = (stream.t[f] - stream.t[lo]) / (stream.t[hi] - stream.t[lo]);
                for c in 0..d {
                    let a = stream.data[at(lo, k) + c];
                    let b = stream.data[at(hi, k) + c];
                    out.data[dst + c] = a + frac * (b - a);
                }
            }
        }
    }
    if report.total() > 0 {
        log::info!(
            "filled {} occluded marker samples across {} markers",
            report.total(),
            report.per_marker.iter().filter(|&&c| c > 0).count()
        );
    }
    Ok((out, report))
}

/// Linearly interpolates every channel of `stream` at `times`.
///
/// `times` must be non-decreasing and lie inside the stream's span; a time
/// equal to a frame timestamp reproduces that frame exactly.
pub fn interpolate_at(stream: &MoCapStream, times: &[f64], rate: f64) -> Result<MoCapStream> {
    let n = stream.frames();
    if n < 2 {
        return Err(Error::Data(format!("interpolation needs at least 2 frames, got {n}")));
    }
    if stream.has_gaps() {
        return Err(Error::Data("stream has unfilled gaps; run fill_gaps first".into()));
    }
    let (t0, t_end) = (stream.t[0], stream.t[n - 1]);
    let k = stream.frame_len();
    let mut data = Vec::with_capacity(times.len() * k);
    let mut seg = 0;
    for &tau in times {
        if tau < t0 || tau > t_end {
            return Err(Error::Data(format!(
                "interpolation time {tau} outside stream span [{t0}, {t_end}]"
            )));
        }
        while seg + 2 < n && stream.t[seg + 1] < tau {
            seg += 1;
        }
        let (ta, tb) = (stream.t[seg], stream.t[seg + 1]);
        let (a, b) = (stream.frame(seg), stream.frame(seg + 1));
        if tau == ta {
            data.extend_from_slice(a);
        } else if tau == tb {
            data.extend_from_slice(b);
        } else {
            let frac = (tau - ta) / (tb - ta);
            data.extend(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)));
        }
    }
    MoCapStream::new(times.to_vec(), stream.markers.clone(), stream.dims, rate, data)
}

/// Resamples onto the uniform grid `t₀ + n/target_rate` covering
/// `[t₀, t_{N-1}]`.
pub fn resample_linear(stream: &MoCapStream, target_rate: f64) -> Result<MoCapStream> {
    if !(target_rate > 0.0) {
        return Err(Error::Config(format!("target rate must be positive, got {target_rate}")));
    }
    if stream.frames() < 2 {
        return Err(Error::Data(format!(
            "resampling needs at least 2 frames, got {}",
            stream.frames()
        )));
    }
    let t0 = stream.t[0];
    let span = stream.duration();
    // Grid points within a relative 1e-9 of the last frame count as inside.
    let count = (span * target_rate * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
    let times: Vec<f64> = (0..count)
        .map(|i| (t0 + i as f64 / target_rate).min(stream.t[stream.frames() - 1]))
        .collect();
    interpolate_at(stream, &times, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(t: Vec<f64>, data: Vec<f64>, markers: usize) -> MoCapStream {
        let names = (0..markers).map(|i| format!("m{i}")).collect();
        MoCapStream::new(t, names, 1, 250.0, data).unwrap()
    }

    #[test]
    fn interior_gap_is_linear() {
        let s = stream(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, f64::NAN, f64::NAN, 3.0], 1);
        let (f, report) = fill_gaps(&s).unwrap();
        assert_eq!(f.data, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(report.total(), 2);
    }

    #[test]
    fn edge_gaps_hold_nearest() {
        let s = stream(vec![0.0, 1.0, 2.0, 3.0], vec![f64::NAN, 5.0, 7.0, f64::NAN], 1);
        let (f, _) = fill_gaps(&s).unwrap();
        assert_eq!(f.data, vec![5.0, 5.0, 7.0, 7.0]);
    }

    #[test]
    fn never_seen_marker_is_an_error() {
        let s = stream(vec![0.0, 1.0], vec![1.0, f64::NAN, 2.0, f64::NAN], 2);
        assert!(matches!(fill_gaps(&s), Err(Error::Data(_))));
    }

    #[test]
    fn one_frame_cannot_be_resampled() {
        let s = stream(vec![0.0], vec![1.0], 1);
        assert!(matches!(resample_linear(&s, 256.0), Err(Error::Data(_))));
    }
}
