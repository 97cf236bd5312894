use std::fs;
use std::path::Path;

use crate::dsp::{PreprocessConfig, Taper, WindowedPairs};
use crate::error::{Error, Result};

pub const PAIRS_MAGIC: &[u8; 8] = b"MC2RPAIR";
pub const PAIRS_VERSION: u32 = 1;

/// Fixed header size in bytes: magic, version, six `u32` extents, two `f64`
/// rates, taper byte and three padding bytes.
const HEADER_LEN: usize = 8 + 4 + 6 * 4 + 2 * 8 + 4;

fn taper_code(t: Taper) -> u8 {
    match t {
        Taper::Rectangular => 0,
        Taper::Hann => 1,
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what}={v} does not fit in u32")))
}

/// Writes `pairs` to `path`. Values are stored as `f32`.
pub fn save_pairs(pairs: &WindowedPairs, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    pairs.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("refusing to save an empty pairs set (T = 0)".into()));
    }
    let cfg = &pairs.cfg;
    let mut buf = Vec::with_capacity(
        HEADER_LEN + 8 * pairs.len() + 4 * (pairs.mocap.len() + pairs.spec.len()),
    );
    buf.extend_from_slice(PAIRS_MAGIC);
    buf.extend_from_slice(&PAIRS_VERSION.to_le_bytes());
    for (v, what) in [
        (pairs.len(), "T"),
        (cfg.window, "W"),
        (pairs.markers, "M"),
        (pairs.dims, "D"),
        (pairs.bins(), "F"),
        (cfg.hop, "H"),
    ] {
        buf.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    buf.extend_from_slice(&cfg.mocap_rate.to_le_bytes());
    buf.extend_from_slice(&cfg.radar_rate.to_le_bytes());
    buf.extend_from_slice(&[taper_code(cfg.taper), 0, 0, 0]);
    for &s in &pairs.starts {
        buf.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for &v in pairs.mocap.iter().chain(&pairs.spec) {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().unwrap())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().unwrap())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }

    fn f32s(&mut self, n: usize) -> Vec<f64> {
        self.take(4 * n)
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()
    }
}

/// Reads a pairs container, validating the header and the exact file size
/// before decoding any payload.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<WindowedPairs> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..8] != PAIRS_MAGIC {
        return Err(bad("not a pairs container (bad magic)".into()));
    }
    let mut cur = Cursor { bytes: &bytes, pos: 8 };
    let version = cur.u32();
    if version != PAIRS_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let [t, w, m, d, f, h] = [(); 6].map(|_| cur.u32() as usize);
    let mocap_rate = cur.f64();
    let radar_rate = cur.f64();
    let taper = match cur.take(4)[0] {
        0 => Taper::Rectangular,
        1 => Taper::Hann,
        code => return Err(bad(format!("unknown taper code {code}"))),
    };
    if t == 0 || w == 0 || m == 0 || d == 0 || h == 0 {
        return Err(bad(format!("zero extent in header (T={t} W={w} M={m} D={d} H={h})")));
    }
    if f != w {
        return Err(bad(format!("bin count F={f} differs from window W={w}")));
    }
    let n_mocap = t
        .checked_mul(w)
        .and_then(|v| v.checked_mul(m))
        .and_then(|v| v.checked_mul(d));
    let expected = n_mocap
        .and_then(|nm| nm.checked_add(t * f))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + 8 * t));
    let (Some(n_mocap), Some(expected)) = (n_mocap, expected) else {
        return Err(bad("header extents overflow".into()));
    };
    if bytes.len() != expected {
        return Err(bad(format!(
            "file is {} bytes but the header (T={t} W={w} M={m} D={d} F={f}) implies {expected}",
            bytes.len()
        )));
    }
    let starts = (0..t).map(|_| cur.u64() as usize).collect();
    let mocap = cur.f32s(n_mocap);
    let spec = cur.f32s(t * f);
    let pairs = WindowedPairs {
        cfg: PreprocessConfig {
            window: w,
            hop: h,
            mocap_rate,
            radar_rate,
            taper,
        },
        markers: m,
        dims: d,
        mocap,
        spec,
        starts,
    };
    pairs.validate().map_err(|e| bad(e.to_string()))?;
    Ok(pairs)
}
