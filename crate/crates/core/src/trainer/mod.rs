//! Training loop and evaluation.
//!
//! Each epoch re-augments the training windows with a seed derived from the
//! master seed and the epoch number, takes one Adam step per batch on the
//! increment loss, then scores the validation windows in eval mode. The
//! learning rate follows a reduce-on-plateau schedule on the validation loss
//! and the parameters with the best validation loss are retained.

mod eval;
mod loss;

pub use eval::{evaluate, predict_sequence_delta, SequenceResult};
pub use loss::{check_horizons, increment_loss, increment_loss_node, window_loss, LossTerms};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use lgc_autodiff::{AdamConfig, AdamState, Graph, Mode, PlateauConfig, PlateauScheduler, Tensor};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{augment, Window};
use crate::error::{Error, Result};
use crate::model::{calibrate, forward, Bound, ModelParams, INPUT_CHANNELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Increment lengths in samples.
    pub horizons: Vec<usize>,
    /// Gaussian noise added to the normalised input channels each epoch.
    pub augment_std: f64,
    pub seed: u64,
    /// Training window stride in samples; a quarter window when unset.
    pub stride: Option<usize>,
    /// Windows per optimiser step; all of them when unset.
    pub batch_size: Option<usize>,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 8e-4,
            weight_decay: 0.1,
            epochs: 4000,
            horizons: vec![16, 32],
            augment_std: 0.01,
            seed: 0,
            stride: None,
            batch_size: None,
            plateau_patience: 100,
            plateau_factor: 0.5,
            min_lr: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn stride_for(&self, window: usize) -> usize {
        self.stride.unwrap_or((window / 4).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad(format!("horizons must be non-empty and >= 1, got {:?}", self.horizons));
        }
        if !(self.augment_std >= 0.0 && self.augment_std.is_finite()) {
            return bad(format!("augment_std must be finite and >= 0, got {}", self.augment_std));
        }
        if self.stride == Some(0) || self.batch_size == Some(0) {
            return bad("stride and batch_size must be >= 1".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor must be in (0, 1), got {}", self.plateau_factor));
        }
        if !(self.min_lr >= 0.0 && self.min_lr.is_finite()) {
            return bad(format!("min_lr must be finite and >= 0, got {}", self.min_lr));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    /// Wall time of the epoch.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainReport {
    /// `epoch,train_loss,val_loss,lr,seconds`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let f = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(f);
        writeln!(w, "epoch,train_loss,val_loss,lr,seconds").map_err(io)?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{:.6}",
                e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the lowest validation loss.
    pub best: ModelParams,
    pub last: ModelParams,
    pub report: TrainReport,
}

fn stack(windows: &[&Window], field: impl Fn(&Window) -> &[f64], channels: usize) -> Result<Tensor> {
    let n = windows[0].n;
    let data = windows.iter().flat_map(|w| field(w).iter().copied()).collect();
    Ok(Tensor::new(vec![windows.len(), channels, n], data)?)
}

/// Sum of `v` by recursive halving, independent of any thread schedule.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Mean increment loss of `windows` in eval mode. Windows are scored in
/// parallel; the reduction order is fixed.
pub fn validation_loss(params: &ModelParams, windows: &[Window], horizons: &[usize]) -> Result<f64> {
    let parts = windows
        .par_iter()
        .map(|w| {
            let mut g = Graph::new();
            let bound = Bound::new(&mut g, params, false);
            let x = g.input(Tensor::new(vec![INPUT_CHANNELS, w.n], w.data.clone())?);
            let raw = g.input(Tensor::new(vec![3, w.n], w.raw_gyro.clone())?);
            let out = forward(&mut g, &bound, params, x, Mode::Eval, 0)?;
            let om = calibrate(&mut g, raw, out.delta, bound.get(crate::model::CALIB))?;
            let v = g.value(om).data();
            let n = w.n;
            let omega: Vec<_> = (0..n)
                .map(|k| nalgebra::Vector3::new(v[k], v[n + k], v[2 * n + k]))
                .collect();
            let terms = window_loss(&omega, w.timestamps(), w.gt.rotations(), horizons, w.pad, false)?;
            Ok((terms.sum, terms.count))
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let sums: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let count: usize = parts.iter().map(|p| p.1).sum();
    if count == 0 {
        return Err(Error::InvalidArgument(
            "validation windows hold no complete increment for any horizon".into(),
        ));
    }
    Ok(pairwise_sum(&sums) / count as f64)
}

fn non_finite(epoch: usize, params: &ModelParams, grads: &[Vec<f64>], loss: f64) -> Error {
    let culprit = params
        .trainable()
        .keys()
        .zip(grads)
        .find(|(_, g)| g.iter().any(|v| !v.is_finite()))
        .map(|(n, _)| n.as_str());
    let detail = match culprit {
        Some(name) => format!("loss {loss}, first non-finite gradient in {name}"),
        None => format!("loss {loss}, all parameter gradients finite"),
    };
    Error::NonFinite { epoch, detail }
}

/// Trains `init` on `train` windows, scheduling on `val` windows.
///
/// A learning rate of zero freezes the model: no optimiser step and no
/// running-statistic update, so the result equals `init`.
pub fn train(train: &[Window], val: &[Window], init: ModelParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "training needs at least one training and one validation window, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let n = train[0].n;
    if train.iter().chain(val).any(|w| w.n != n) {
        return Err(Error::InvalidArgument("all windows must have the same length".into()));
    }
    check_horizons(&cfg.horizons, n)?;

    let frozen = cfg.lr == 0.0;
    let mut params = init;
    let sizes: Vec<usize> = params.trainable().values().map(Tensor::len).collect();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        &sizes,
    );
    let mut scheduler = PlateauScheduler::new(
        PlateauConfig {
            factor: cfg.plateau_factor,
            patience: cfg.plateau_patience,
            min_lr: cfg.min_lr,
            ..PlateauConfig::default()
        },
        cfg.lr,
    );
    let batch_size = cfg.batch_size.unwrap_or(train.len()).min(train.len());
    let mut report = TrainReport {
        best_val_loss: f64::INFINITY,
        ..TrainReport::default()
    };
    let mut best = params.clone();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        if batch_size < train.len() {
            order.shuffle(&mut rng);
        }
        let augmented: Vec<Window> = train
            .iter()
            .map(|w| {
                let seed = rng.next_u64();
                if cfg.augment_std > 0.0 {
                    augment(w, &[cfg.augment_std; 6], seed)
                } else {
                    w.clone()
                }
            })
            .collect();

        let lr = adam.lr();
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let windows: Vec<&Window> = chunk.iter().map(|&i| &augmented[i]).collect();
            let mut g = Graph::new();
            let bound = Bound::new(&mut g, &params, true);
            let x = g.input(stack(&windows, |w| &w.data, INPUT_CHANNELS)?);
            let raw = g.input(stack(&windows, |w| &w.raw_gyro, 3)?);
            let out = forward(&mut g, &bound, &params, x, Mode::Train, rng.next_u64())?;
            let om = calibrate(&mut g, raw, out.delta, bound.get(crate::model::CALIB))?;
            let loss = increment_loss_node(&mut g, om, &windows, &cfg.horizons)?;
            g.backward(loss)?;
            let loss_value = g.value(loss).item();
            let grads: Vec<Vec<f64>> = bound
                .vars()
                .zip(&sizes)
                .map(|(v, &len)| g.grad(v).map_or_else(|| vec![0.0; len], <[f64]>::to_vec))
                .collect();
            if !loss_value.is_finite() || grads.iter().flatten().any(|v| !v.is_finite()) {
                return Err(non_finite(epoch, &params, &grads, loss_value));
            }
            loss_sum += loss_value;
            batches += 1;
            if frozen {
                continue;
            }
            let decay = params.decay_flags().to_vec();
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            let mut targets: Vec<&mut Tensor> = params.trainable_mut().collect();
            adam.step(&mut targets, &grad_refs, &decay)?;
            for (layer, stats) in out.batch_stats.iter().enumerate() {
                params.update_running_stats(layer, stats);
            }
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("parameter {name} became non-finite after the update"),
            });
        }

        let val_loss = validation_loss(&params, val, &cfg.horizons)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("validation loss {val_loss}"),
            });
        }
        if !frozen {
            adam.set_lr(scheduler.step(val_loss));
        }
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = params.clone();
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "epoch {epoch}: train {:.6e} val {:.6e} lr {:.2e}",
            stats.train_loss,
            stats.val_loss,
            stats.lr
        );
        report.epochs.push(stats);
    }
    Ok(TrainOutcome {
        best,
        last: params,
        report,
    })
}
