//! Grayscale raster output: binary PGM images with a CSV twin holding the
//! plotted values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mocap_doppler::train::RunLog;

/// Intensities in `[0, 1]`, row-major, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// One spectrogram: `frames × bins`, time-major, bin 0 the most negative
/// frequency.
pub struct Panel<'a> {
    pub frames: usize,
    pub bins: usize,
    pub values: &'a [f64],
}

/// Min-max normalisation shared by all values; a constant input maps to 0.5.
fn normalise(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// Stacks panels vertically, first on top. Columns are time, rows are
/// frequency with the highest bin at the top of each panel.
pub fn spectrogram_image(panels: &[Panel<'_>]) -> Result<Image> {
    let Some(first) = panels.first() else {
        bail!("nothing to render");
    };
    for p in panels {
        if p.frames != first.frames || p.bins != first.bins {
            bail!(
                "panels differ in shape: {} x {} vs {} x {} (frames x bins)",
                first.frames,
                first.bins,
                p.frames,
                p.bins
            );
        }
        if p.values.len() != p.frames * p.bins || p.frames == 0 || p.bins == 0 {
            bail!("panel holds {} values, expected {} x {}", p.values.len(), p.frames, p.bins);
        }
    }
    let norm = normalise(panels.iter().flat_map(|p| p.values.iter().copied()));
    let (width, bins) = (first.frames, first.bins);
    let mut pixels = Vec::with_capacity(width * bins * panels.len());
    for p in panels {
        for f in (0..bins).rev() {
            pixels.extend((0..width).map(|t| norm(p.values[t * bins + f])));
        }
    }
    Ok(Image {
        width,
        height: bins * panels.len(),
        pixels,
    })
}

const CURVE_HEIGHT: usize = 128;
const CURVE_WIDTH: usize = 256;

/// Training-loss curves, one per run: `log10` train MSE against epoch, all
/// runs on common axes. Background is white; run `k` of `n` is drawn at gray
/// level `k / n`. Returns the image and a CSV with the plotted losses.
pub fn curve_image(runs: &[RunLog]) -> Result<(Image, String)> {
    let epochs = runs.iter().map(|r| r.epochs.len()).max().unwrap_or(0);
    if epochs == 0 {
        bail!("run log holds no epochs");
    }
    let logs: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.epochs.iter().map(|e| e.train_mse.max(f64::MIN_POSITIVE).log10()).collect())
        .collect();
    let norm = normalise(logs.iter().flatten().copied());
    let step = (CURVE_WIDTH / epochs).max(1);
    let width = step * epochs;
    let mut img = Image {
        width,
        height: CURVE_HEIGHT,
        pixels: vec![1.0; width * CURVE_HEIGHT],
    };
    let y_of = |v: f64| ((1.0 - norm(v)) * (CURVE_HEIGHT - 1) as f64).round() as usize;
    for (k, curve) in logs.iter().enumerate() {
        let shade = k as f64 / runs.len() as f64;
        for (i, &v) in curve.iter().enumerate() {
            let y = y_of(v);
            let y_next = curve.get(i + 1).map_or(y, |&n| y_of(n));
            for dx in 0..step {
                let x = i * step + dx;
                let yy = if step > 1 {
                    let f = dx as f64 / step as f64;
                    (y as f64 + f * (y_next as f64 - y as f64)).round() as usize
                } else {
                    y
                };
                let (a, b) = (yy.min(y), yy.max(y));
                for row in a..=b {
                    img.pixels[row * width + x] = shade;
                }
            }
        }
    }

    let mut csv = String::from("epoch");
    for r in runs {
        let _ = write!(csv, ",{}_seed{}_train_mse", r.variant.key(), r.seed);
    }
    csv.push('\n');
    for e in 0..epochs {
        let _ = write!(csv, "{}", e + 1);
        for r in runs {
            match r.epochs.get(e) {
                Some(rec) => {
                    let _ = write!(csv, ",{}", rec.train_mse);
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    Ok((img, csv))
}

/// `out.pgm` → `out.csv`.
pub fn csv_twin(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

pub fn write_outputs(out: &Path, img: &Image, csv: &str) -> Result<PathBuf> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(out, img.pgm_bytes()).with_context(|| format!("writing {}", out.display()))?;
    let twin = csv_twin(out);
    if twin == out {
        bail!("output {} must not end in .csv", out.display());
    }
    fs::write(&twin, csv).with_context(|| format!("writing {}", twin.display()))?;
    Ok(twin)
}
