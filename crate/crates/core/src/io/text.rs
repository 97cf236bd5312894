use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dsp::{MoCapStream, RadarSignal};
use crate::error::{Error, Result};

pub const TEXT_FORMAT_VERSION: u32 = 1;

const AXES: [&str; 3] = ["x", "y", "z"];

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

struct Records {
    path: std::path::PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_records(path: &Path) -> Result<Records> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push((line, rec));
    }
    Ok(Records {
        path: path.to_path_buf(),
        rows,
    })
}

impl Records {
    fn metadata(&self, format: &str) -> Result<BTreeMap<String, String>> {
        let Some((line, rec)) = self.rows.first() else {
            return Err(parse_err(&self.path, 1, "empty file"));
        };
        let mut meta = BTreeMap::new();
        for field in rec.iter() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| parse_err(&self.path, *line, format!("expected key=value, got '{field}'")))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        if meta.get("format").map(String::as_str) != Some(format) {
            return Err(parse_err(&self.path, *line, format!("not a {format} file (missing format={format})")));
        }
        let version = meta.get("version").map(String::as_str).unwrap_or("");
        if version != TEXT_FORMAT_VERSION.to_string() {
            return Err(parse_err(&self.path, *line, format!("unsupported version '{version}'")));
        }
        Ok(meta)
    }

    fn header(&self) -> Result<&(u64, csv::StringRecord)> {
        self.rows
            .get(1)
            .ok_or_else(|| parse_err(&self.path, 2, "missing column header line"))
    }
}

fn meta_num<T: std::str::FromStr>(
    meta: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<T> {
    let raw = meta
        .get(key)
        .ok_or_else(|| parse_err(path, 1, format!("metadata lacks '{key}'")))?;
    raw.parse()
        .map_err(|_| parse_err(path, 1, format!("metadata '{key}={raw}' is not a number")))
}

fn num(path: &Path, line: u64, col: usize, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(path, line, format!("column {} value '{raw}' is not a number", col + 1)))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column {} value '{raw}' is not finite", col + 1)));
    }
    Ok(v)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reads a MoCap text file. Empty coordinate fields mark occluded samples
/// and load as `NaN`.
pub fn load_mocap(path: impl AsRef<Path>) -> Result<MoCapStream> {
    let path = path.as_ref();
    let recs = read_records(path)?;
    let meta = recs.metadata("mocap")?;
    let rate: f64 = meta_num(&meta, "rate_hz", path)?;
    let markers: usize = meta_num(&meta, "markers", path)?;
    let dims: usize = meta_num(&meta, "dims", path)?;
    if let Some(units) = meta.get("units") {
        if units != "m" {
            return Err(parse_err(path, 1, format!("unsupported units '{units}', expected m")));
        }
    }
    if !(rate > 0.0) || markers == 0 || dims == 0 {
        return Err(parse_err(path, 1, "rate, markers and dims must be positive"));
    }
    let cols = 2 + markers * dims;
    let (hline, header) = recs.header()?;
    if header.len() != cols {
        return Err(parse_err(
            path,
            *hline,
            format!("header has {} columns, expected {cols} (2 + {markers} x {dims})", header.len()),
        ));
    }
    let mut names = Vec::with_capacity(markers);
    for m in 0..markers {
        let col = &header[2 + m * dims];
        let name = col.rsplit_once('_').map(|(n, _)| n).unwrap_or(col);
        names.push(name.to_string());
    }

    let mut t = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in &recs.rows[2..] {
        if rec.len() != cols {
            return Err(parse_err(path, *line, format!("row has {} columns, expected {cols}", rec.len())));
        }
        rec[0]
            .parse::<u64>()
            .map_err(|_| parse_err(path, *line, format!("frame index '{}' is not an integer", &rec[0])))?;
        let time = num(path, *line, 1, &rec[1])?;
        if let Some(&prev) = t.last() {
            if time <= prev {
                return Err(parse_err(path, *line, "timestamps not strictly increasing"));
            }
        }
        t.push(time);
        for m in 0..markers {
            let fields: Vec<&str> = (0..dims).map(|c| &rec[2 + m * dims + c]).collect();
            if fields.iter().all(|f| f.is_empty()) {
                data.extend(std::iter::repeat_n(f64::NAN, dims));
            } else {
                for (c, f) in fields.iter().enumerate() {
                    data.push(num(path, *line, 2 + m * dims + c, f)?);
                }
            }
        }
    }
    if t.len() >= 2 {
        let deltas: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let measured = 1.0 / median(deltas);
        if ((measured - rate) / rate).abs() > 1e-3 {
            return Err(Error::Data(format!(
                "{}: declared rate {rate} Hz but timestamps imply {measured:.4} Hz",
                path.display()
            )));
        }
    }
    MoCapStream::new(t, names, dims, rate, data)
}

pub fn save_mocap(stream: &MoCapStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    stream.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let d = stream.dims;
    let mut out = format!(
        "format=mocap,version={TEXT_FORMAT_VERSION},rate_hz={},units=m,markers={},dims={d}\nframe,time",
        stream.rate,
        stream.n_markers()
    );
    for name in &stream.markers {
        for c in 0..d {
            let axis = if d == 3 { AXES[c].to_string() } else { c.to_string() };
            out.push_str(&format!(",{name}_{axis}"));
        }
    }
    out.push('\n');
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    for (i, &time) in stream.t.iter().enumerate() {
        let mut line = format!("{i},{time}");
        for v in stream.frame(i) {
            if v.is_nan() {
                line.push(',');
            } else {
                line.push_str(&format!(",{v}"));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a radar I/Q text file.
pub fn load_radar(path: impl AsRef<Path>) -> Result<RadarSignal> {
    let path = path.as_ref();
    let recs = read_records(path)?;
    let meta = recs.metadata("radar")?;
    let rate: f64 = meta_num(&meta, "rate_hz", path)?;
    let carrier: f64 = match meta.get("carrier_hz") {
        Some(_) => meta_num(&meta, "carrier_hz", path)?,
        None => 5.8e9,
    };
    let (hline, header) = recs.header()?;
    if header.len() != 3 {
        return Err(parse_err(path, *hline, "header must be time,i,q"));
    }
    let mut t = Vec::new();
    let mut iq = Vec::new();
    for (line, rec) in &recs.rows[2..] {
        if rec.len() != 3 {
            return Err(parse_err(path, *line, format!("row has {} columns, expected 3", rec.len())));
        }
        let time = num(path, *line, 0, &rec[0])?;
        if let Some(&prev) = t.last() {
            if time <= prev {
                return Err(parse_err(path, *line, "timestamps not strictly increasing"));
            }
        }
        t.push(time);
        iq.push(Complex64::new(num(path, *line, 1, &rec[1])?, num(path, *line, 2, &rec[2])?));
    }
    RadarSignal::new(t, iq, rate, carrier).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_radar(signal: &RadarSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    signal.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let head = format!(
        "format=radar,version={TEXT_FORMAT_VERSION},rate_hz={},carrier_hz={}\ntime,i,q\n",
        signal.rate, signal.carrier_hz
    );
    w.write_all(head.as_bytes()).map_err(|e| Error::io(path, e))?;
    for (time, v) in signal.t.iter().zip(&signal.iq) {
        writeln!(w, "{time},{},{}", v.re, v.im).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Spectrogram rows on a time axis, as written by inference and read by the
/// renderer. Row `t` holds `bins` zero-centred magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramTable {
    /// Radar rate `F_r`; bin `f` sits at `(f − ⌊F/2⌋)·F_r/W` Hz.
    pub rate_hz: f64,
    pub window: usize,
    pub hop: usize,
    /// Centre time of each window in seconds.
    pub times: Vec<f64>,
    pub bins: usize,
    /// `T × bins`, time-major.
    pub values: Vec<f64>,
}

impl SpectrogramTable {
    pub fn frames(&self) -> usize {
        self.times.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.bins..(t + 1) * self.bins]
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.times.is_empty() || self.values.len() != self.times.len() * self.bins {
            return Err(Error::Dimension(format!(
                "spectrogram table: {} values for {} frames x {} bins",
                self.values.len(),
                self.times.len(),
                self.bins
            )));
        }
        if !(self.rate_hz > 0.0) || self.window == 0 || self.hop == 0 {
            return Err(Error::Config("spectrogram table needs positive rate, window and hop".into()));
        }
        Ok(())
    }
}

pub fn save_spectrogram(table: &SpectrogramTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    table.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut head = format!(
        "format=spectrogram,version={TEXT_FORMAT_VERSION},rate_hz={},window={},hop={},bins={}\ntime_s",
        table.rate_hz, table.window, table.hop, table.bins
    );
    for f in 0..table.bins {
        head.push_str(&format!(",bin_{f}"));
    }
    head.push('\n');
    w.write_all(head.as_bytes()).map_err(|e| Error::io(path, e))?;
    for (t, time) in table.times.iter().enumerate() {
        let mut line = time.to_string();
        for v in table.row(t) {
            line.push_str(&format!(",{v}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_spectrogram(path: impl AsRef<Path>) -> Result<SpectrogramTable> {
    let path = path.as_ref();
    let recs = read_records(path)?;
    let meta = recs.metadata("spectrogram")?;
    let rate_hz: f64 = meta_num(&meta, "rate_hz", path)?;
    let window: usize = meta_num(&meta, "window", path)?;
    let hop: usize = meta_num(&meta, "hop", path)?;
    let bins: usize = meta_num(&meta, "bins", path)?;
    let (hline, header) = recs.header()?;
    if header.len() != bins + 1 || &header[0] != "time_s" {
        return Err(parse_err(path, *hline, format!("header must be time_s followed by {bins} bin columns")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in &recs.rows[2..] {
        if rec.len() != bins + 1 {
            return Err(parse_err(path, *line, format!("row has {} columns, expected {}", rec.len(), bins + 1)));
        }
        times.push(num(path, *line, 0, &rec[0])?);
        for c in 1..=bins {
            values.push(num(path, *line, c, &rec[c])?);
        }
    }
    let table = SpectrogramTable {
        rate_hz,
        window,
        hop,
        times,
        bins,
        values,
    };
    table.validate().map_err(|e| parse_err(path, 1, e.to_string()))?;
    Ok(table)
}
