use serde::{Deserialize, Serialize};

use crate::dsp::{MoCapStream, RadarSignal};
use crate::error::{Error, Result};

/// Times at which both devices logged the same synchronisation pulse, each
/// on its own clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncMark {
    pub mocap_epoch_s: f64,
    pub radar_epoch_s: f64,
}

/// Moves both streams onto the pulse clock (pulse at `t = 0`) and crops them
/// to their common span. Clock drift is not modelled; only the offset is
/// removed.
///
/// The radar keeps exactly the samples inside the overlap. MoCap keeps the
/// frames inside it plus at most one bracketing frame on each side, so the
/// overlap can still be interpolated up to its edges.
pub fn align(
    mocap: &MoCapStream,
    radar: &RadarSignal,
    sync: SyncMark,
) -> Result<(MoCapStream, RadarSignal)> {
    if !sync.mocap_epoch_s.is_finite() || !sync.radar_epoch_s.is_finite() {
        return Err(Error::Data("sync mark times must be finite".into()));
    }
    if mocap.frames() == 0 || radar.is_empty() {
        return Err(Error::Data("cannot align an empty stream".into()));
    }
    let (m0, m1) = (mocap.t[0], mocap.t[mocap.frames() - 1]);
    let (r0, r1) = (radar.t[0], radar.t[radar.len() - 1]);
    if !(m0..=m1).contains(&sync.mocap_epoch_s) {
        return Err(Error::Data(format!(
            "mocap sync time {} s outside the recording [{m0}, {m1}]",
            sync.mocap_epoch_s
        )));
    }
    if !(r0..=r1).contains(&sync.radar_epoch_s) {
        return Err(Error::Data(format!(
            "radar sync time {} s outside the recording [{r0}, {r1}]",
            sync.radar_epoch_s
        )));
    }

    let mt: Vec<f64> = mocap.t.iter().map(|t| t - sync.mocap_epoch_s).collect();
    let rt: Vec<f64> = radar.t.iter().map(|t| t - sync.radar_epoch_s).collect();
    let lo = mt[0].max(rt[0]);
    let hi = mt[mt.len() - 1].min(rt[rt.len() - 1]);
    if hi <= lo {
        return Err(Error::Data(format!(
            "streams do not overlap after alignment (mocap [{}, {}], radar [{}, {}])",
            mt[0],
            mt[mt.len() - 1],
            rt[0],
            rt[rt.len() - 1]
        )));
    }
    let tol = 1e-9 / radar.rate;
    let r_first = rt.partition_point(|&t| t < lo - tol);
    let r_end = rt.partition_point(|&t| t <= hi + tol);
    // Last frame at or before `lo`, first frame at or after `hi`.
    let m_first = mt.partition_point(|&t| t <= lo).saturating_sub(1);
    let m_end = (mt.partition_point(|&t| t < hi) + 1).min(mt.len());

    let k = mocap.frame_len();
    let mocap = MoCapStream::new(
        mt[m_first..m_end].to_vec(),
        mocap.markers.clone(),
        mocap.dims,
        mocap.rate,
        mocap.data[m_first * k..m_end * k].to_vec(),
    )?;
    let radar = RadarSignal::new(
        rt[r_first..r_end].to_vec(),
        radar.iq[r_first..r_end].to_vec(),
        radar.rate,
        radar.carrier_hz,
    )?;
    Ok((mocap, radar))
}
