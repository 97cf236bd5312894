use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Variant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    /// Learning rate used at each optimizer step of this epoch.
    pub lr: Vec<f64>,
}

/// Metrics of one training run.
///
/// Serialised as line-delimited JSON: a `run` record followed by one
/// `epoch` record per epoch. Wall-clock times stay in memory so that
/// reruns produce byte-identical logs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub variant: Variant,
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub total_steps: usize,
    pub epochs: Vec<EpochRecord>,
    pub wall_clock_s: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line {
    Run {
        variant: Variant,
        /// Display name of the variant (`S`, `T`, `S+T`); informational.
        #[serde(default)]
        kind: String,
        seed: u64,
        total_steps: usize,
        train_indices: Vec<usize>,
        val_indices: Vec<usize>,
    },
    Epoch(EpochRecord),
}

impl RunLog {
    /// Every learning rate in step order.
    pub fn lr_trace(&self) -> Vec<f64> {
        self.epochs.iter().flat_map(|e| e.lr.iter().copied()).collect()
    }

    pub fn final_train_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_mse)
    }

    pub fn to_jsonl(&self) -> String {
        let head = Line::Run {
            variant: self.variant,
            kind: self.variant.to_string(),
            seed: self.seed,
            total_steps: self.total_steps,
            train_indices: self.train_indices.clone(),
            val_indices: self.val_indices.clone(),
        };
        let mut out = serde_json::to_string(&head).expect("run record serialises");
        out.push('\n');
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(&Line::Epoch(e.clone())).expect("epoch record serialises"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Parses one or more concatenated logs.
    pub fn parse_all(text: &str) -> Result<Vec<RunLog>> {
        let mut logs: Vec<RunLog> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("run log line {}: {e}", i + 1)))?;
            match rec {
                Line::Run {
                    variant,
                    seed,
                    kind: _,
                    total_steps,
                    train_indices,
                    val_indices,
                } => logs.push(RunLog {
                    variant,
                    seed,
                    train_indices,
                    val_indices,
                    total_steps,
                    epochs: Vec::new(),
                    wall_clock_s: Vec::new(),
                }),
                Line::Epoch(e) => logs
                    .last_mut()
                    .ok_or_else(|| Error::Format(format!("run log line {}: epoch before run record", i + 1)))?
                    .epochs
                    .push(e),
            }
        }
        Ok(logs)
    }

    pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<RunLog>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_all(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
