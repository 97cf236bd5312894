use std::path::PathBuf;
use std::time::Instant;

use crate::dsp::{PreprocessConfig, WindowedPairs};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Mode, SttModel};
use crate::tensor::{Graph, RngState, Tensor, Var};
use crate::train::{adam_step, one_cycle_lr, AdamState, EpochRecord, RunLog, TrainConfig};

const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;

/// `(1/W)·Σ (pred − target)²` on a graph.
pub fn mse_loss(g: &mut Graph, pred: &Var, target: &Var) -> Result<Var> {
    if pred.shape() != target.shape() {
        return Err(Error::Contract(format!(
            "mse: prediction shape {:?} differs from target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let d = g.sub(pred, target)?;
    let sq = g.mul(&d, &d)?;
    Ok(g.mean(&sq))
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Contract(format!(
            "mse: lengths {} and {} must match and be nonzero",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// Mean per-window MSE in eval mode over the windows at `indices`.
pub fn evaluate(model: &SttModel, pairs: &WindowedPairs, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    let mut total = 0.0;
    for &i in indices {
        total += mse(&model.predict(pairs.input(i))?, pairs.target(i))?;
    }
    Ok(total / indices.len() as f64)
}

/// Seeded window-level split: `floor(val_frac·T)` validation windows, the
/// rest for training. Both lists are sorted.
pub fn split_indices(n: usize, val_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    RngState::new(seed).derive(&[SPLIT_STREAM]).shuffle(&mut order);
    let n_val = (val_frac * n as f64).floor() as usize;
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Held-out pairs evaluated at the end of every epoch.
    pub test: Option<&'a WindowedPairs>,
    /// Directory receiving `final.ckpt`, `best.ckpt` and `runlog.jsonl`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub log: RunLog,
    /// Parameters at the epoch with the lowest validation MSE (training MSE
    /// when there is no validation split).
    pub best: SttModel,
    pub best_epoch: usize,
}

fn check_geometry(model: &SttModel, pairs: &WindowedPairs) -> Result<()> {
    let c = model.config();
    if (pairs.window(), pairs.markers, pairs.dims) != (c.window, c.markers, c.dims) {
        return Err(Error::Config(format!(
            "pairs have W={} M={} D={} but the model expects W={} M={} D={}",
            pairs.window(),
            pairs.markers,
            pairs.dims,
            c.window,
            c.markers,
            c.dims
        )));
    }
    Ok(())
}

/// Loss and accumulated gradient contribution of one window.
fn item_gradients(
    model: &SttModel,
    pairs: &WindowedPairs,
    index: usize,
    rng: RngState,
    scale: f64,
    acc: &mut [Vec<f64>],
) -> Result<f64> {
    let mut g = Graph::new();
    let p = model.bind(&mut g, true);
    let x = model.input(&mut g, pairs.input(index))?;
    let mut mode = Mode::train(model.config().dropout, rng);
    let y = model.forward(&mut g, &p, &x, &mut mode)?;
    let t = g.constant(Tensor::new(vec![pairs.bins()], pairs.target(index).to_vec())?);
    let loss = mse_loss(&mut g, &y, &t)?;
    let loss = g.scale(&loss, scale);
    let mut grads = g.backward(&loss)?;
    for (slot, var) in acc.iter_mut().zip(p.vars()) {
        let gv = grads.take(var);
        for (a, b) in slot.iter_mut().zip(gv.data()) {
            *a += b;
        }
    }
    Ok(loss.value().item())
}

/// Trains `model` in place. Shuffling, the validation split and dropout
/// masks are all derived from `cfg.seed`, so equal inputs give equal logs.
pub fn train(
    model: &mut SttModel,
    pairs: &WindowedPairs,
    cfg: &TrainConfig,
    opts: &TrainOptions<'_>,
) -> Result<TrainResult> {
    cfg.validate()?;
    pairs.validate()?;
    check_geometry(model, pairs)?;
    if let Some(test) = opts.test {
        test.validate()?;
        check_geometry(model, test)?;
    }
    let (train_idx, val_idx) = split_indices(pairs.len(), cfg.val_frac, cfg.seed);
    if train_idx.is_empty() {
        return Err(Error::Data(format!(
            "no training windows: {} windows, {} held out for validation",
            pairs.len(),
            val_idx.len()
        )));
    }
    let steps_per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let root = RngState::new(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut log = RunLog {
        variant: model.variant(),
        seed: cfg.seed,
        train_indices: train_idx.clone(),
        val_indices: val_idx.clone(),
        total_steps,
        epochs: Vec::with_capacity(cfg.epochs),
        wall_clock_s: Vec::with_capacity(cfg.epochs),
    };
    let mut best = (model.clone(), 0usize, f64::INFINITY);
    let mut step = 0usize;
    let all_test: Vec<usize> = opts.test.map(|t| (0..t.len()).collect()).unwrap_or_default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order = train_idx.clone();
        root.derive(&[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        let mut lrs = Vec::with_capacity(steps_per_epoch);
        for batch in order.chunks(cfg.batch_size) {
            let lr = one_cycle_lr(step, total_steps, cfg)?;
            let mut acc: Vec<Vec<f64>> =
                (0..model.params().len()).map(|i| vec![0.0; model.params().get(i).len()]).collect();
            let scale = 1.0 / batch.len() as f64;
            for (k, &i) in batch.iter().enumerate() {
                let rng = root.derive(&[DROPOUT_STREAM, step as u64, k as u64]);
                item_gradients(model, pairs, i, rng, scale, &mut acc)?;
            }
            let grads: Vec<Tensor> = acc
                .into_iter()
                .enumerate()
                .map(|(i, g)| Tensor::new(model.params().get(i).shape().to_vec(), g))
                .collect::<Result<_>>()?;
            adam_step(model.params_mut(), &grads, &mut adam, lr, cfg.weight_decay)?;
            lrs.push(lr);
            step += 1;
        }

        let train_mse = evaluate(model, pairs, &train_idx)?;
        let val_mse = if val_idx.is_empty() { None } else { Some(evaluate(model, pairs, &val_idx)?) };
        let test_mse = match opts.test {
            Some(t) => Some(evaluate(model, t, &all_test)?),
            None => None,
        };
        if !train_mse.is_finite() {
            return Err(Error::Data(format!("training diverged at epoch {epoch} (train MSE {train_mse})")));
        }
        let score = val_mse.unwrap_or(train_mse);
        if score < best.2 {
            best = (model.clone(), epoch, score);
        }
        log::info!(
            "epoch {epoch}/{}: train {train_mse:.6e} val {} test {} lr {:.3e}",
            cfg.epochs,
            val_mse.map_or("-".into(), |v| format!("{v:.6e}")),
            test_mse.map_or("-".into(), |v| format!("{v:.6e}")),
            lrs.last().copied().unwrap_or(0.0)
        );
        log.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            test_mse,
            lr: lrs,
        });
        log.wall_clock_s.push(started.elapsed().as_secs_f64());
    }

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let pre: &PreprocessConfig = &pairs.cfg;
        save_checkpoint(model, Some(pre), dir.join("final.ckpt"))?;
        save_checkpoint(&best.0, Some(pre), dir.join("best.ckpt"))?;
        log.write(dir.join("runlog.jsonl"))?;
    }
    Ok(TrainResult {
        log,
        best: best.0,
        best_epoch: best.1,
    })
}
