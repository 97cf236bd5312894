//! Supervised training: MSE loss, Adam with L2 weight decay, a one-cycle
//! learning-rate schedule, epoch loop with a held-out validation split, and
//! the three-variant ablation runner.

mod ablation;
mod adam;
mod config;
mod runlog;
mod trainer;

pub use ablation::{run_ablation, AblationRow, AblationSummary};
pub use adam::{adam_step, AdamState};
pub use config::{one_cycle_lr, TrainConfig};
pub use runlog::{EpochRecord, RunLog};
pub use trainer::{evaluate, mse, mse_loss, split_indices, train, TrainOptions, TrainResult};
