use std::fmt::Write as _;

use crate::dsp::WindowedPairs;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, SttModel, Variant};
use crate::train::{train, RunLog, TrainConfig, TrainOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Last-epoch training MSE for each seed, in `seeds` order.
    pub final_train_mse: Vec<f64>,
    pub median: f64,
}

#[derive(Clone, Debug)]
pub struct AblationSummary {
    pub rows: Vec<AblationRow>,
    /// Every run, seed-major then in the requested variant order.
    pub runs: Vec<RunLog>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl AblationSummary {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// `(S+T ≤ T, S+T ≤ S)` on median final training MSE; `None` when a
    /// variant is missing.
    pub fn ordering(&self) -> Option<(bool, bool)> {
        let st = self.row(Variant::St)?.median;
        let t = self.row(Variant::T)?.median;
        let s = self.row(Variant::S)?.median;
        Some((st <= t, st <= s))
    }

    /// CSV with one row per variant: name, median, then one column per seed.
    pub fn to_csv(&self) -> String {
        let seeds = self.rows.first().map(|r| r.seeds.clone()).unwrap_or_default();
        let mut out = String::from("variant,median_final_train_mse");
        for s in &seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.variant, r.median);
            for v in &r.final_train_mse {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable table with the ordering verdict.
    pub fn table(&self) -> String {
        let mut out = format!("{:<8}{:>16}  per-seed final train MSE\n", "variant", "median");
        for r in &self.rows {
            let seeds: Vec<String> = r
                .seeds
                .iter()
                .zip(&r.final_train_mse)
                .map(|(s, v)| format!("{s}:{v:.6e}"))
                .collect();
            let _ = writeln!(out, "{:<8}{:>16.6e}  {}", r.variant.to_string(), r.median, seeds.join(" "));
        }
        if let Some((vs_t, vs_s)) = self.ordering() {
            let _ = writeln!(out, "S+T <= T: {vs_t}\nS+T <= S: {vs_s}");
        }
        out
    }
}

/// Trains every variant once per seed on identical data and split. For a
/// given seed the model initialisation and training seeds equal that seed,
/// so the S+T run matches a plain [`train`] call with the same seed.
pub fn run_ablation(
    pairs: &WindowedPairs,
    model_cfg: &ModelConfig,
    variants: &[Variant],
    tcfg: &TrainConfig,
    seeds: &[u64],
) -> Result<AblationSummary> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one variant and one seed".into()));
    }
    let mut runs = Vec::new();
    let mut finals = vec![Vec::new(); variants.len()];
    for &seed in seeds {
        for (k, &variant) in variants.iter().enumerate() {
            let cfg = TrainConfig { seed, ..tcfg.clone() };
            let mut model = SttModel::new(model_cfg, variant, seed)?;
            log::info!("ablation: variant {variant}, seed {seed}");
            let result = train(&mut model, pairs, &cfg, &TrainOptions::default())?;
            finals[k].push(result.log.final_train_mse().expect("at least one epoch"));
            runs.push(result.log);
        }
    }
    let rows = variants
        .iter()
        .zip(finals)
        .map(|(&variant, f)| AblationRow {
            variant,
            seeds: seeds.to_vec(),
            median: median(&f),
            final_train_mse: f,
        })
        .collect();
    Ok(AblationSummary { rows, runs })
}
