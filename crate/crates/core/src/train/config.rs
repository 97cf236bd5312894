use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate `η₀`.
    pub eta0: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub warmup_frac: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub val_frac: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            eta0: 3e-4,
            lr_start: 3e-7,
            lr_end: 3e-10,
            warmup_frac: 0.1,
            weight_decay: 1e-5,
            seed: 0,
            val_frac: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return Err(Error::Config(format!("warmup_frac must be in (0, 1), got {}", self.warmup_frac)));
        }
        if !(self.eta0 > 0.0 && self.lr_start >= 0.0 && self.lr_end >= 0.0) {
            return Err(Error::Config("learning rates must be nonnegative and eta0 positive".into()));
        }
        if !(self.lr_start < self.eta0 && self.lr_end < self.eta0) {
            return Err(Error::Config(format!(
                "lr_start ({}) and lr_end ({}) must be below eta0 ({})",
                self.lr_start, self.lr_end, self.eta0
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.val_frac) {
            return Err(Error::Config(format!("val_frac must be in [0, 1), got {}", self.val_frac)));
        }
        Ok(())
    }

    /// Optimizer steps in the first `ceil(warmup_frac·total)` of the run.
    pub fn warmup_steps(&self, total_steps: usize) -> usize {
        (self.warmup_frac * total_steps as f64).ceil() as usize
    }
}

/// Piecewise-linear one-cycle schedule over optimizer steps: `lr_start` at
/// step 0 rising to `eta0` at the warmup boundary, then falling to `lr_end`
/// at the last step.
pub fn one_cycle_lr(step: usize, total_steps: usize, cfg: &TrainConfig) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::Contract(format!("step {step} outside schedule of {total_steps} steps")));
    }
    let warmup = cfg.warmup_steps(total_steps);
    if step <= warmup {
        let frac = step as f64 / warmup.max(1) as f64;
        return Ok(cfg.lr_start + (cfg.eta0 - cfg.lr_start) * frac);
    }
    let span = total_steps - 1 - warmup;
    let frac = (step - warmup) as f64 / span as f64;
    Ok(cfg.eta0 + (cfg.lr_end - cfg.eta0) * frac)
}
