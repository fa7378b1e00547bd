//! Minibatch MSE training with Adam, seeded train/validation splitting,
//! MAE/RMSE metrics and the model comparison harness.

mod compare;
mod metrics;
mod optim;

pub use compare::{
    compare_models, CompareReport, CompareRow, CompareSettings, REPORT_SCHEMA, REPORT_VERSION,
};
pub use metrics::{compute_metrics, persistence_prediction, Metrics};
pub use optim::{Adam, AdamConfig};

use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Cg3dModel;
use crate::nn::{Mode, Parameterized};
use crate::preprocess::WindowSample;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_for, stream};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Windows are assigned independently.
    Sample,
    /// All windows of a trajectory land on the same side.
    Trajectory,
}

impl FromStr for SplitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(SplitStrategy::Sample),
            "trajectory" => Ok(SplitStrategy::Trajectory),
            _ => Err(Error::Config(format!(
                "unknown split `{s}` (sample, trajectory)"
            ))),
        }
    }
}

impl SplitStrategy {
    pub fn key(self) -> &'static str {
        match self {
            SplitStrategy::Sample => "sample",
            SplitStrategy::Trajectory => "trajectory",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub val_fraction: f64,
    pub seed: u64,
    pub split: SplitStrategy,
    /// Keep dropout active during training passes.
    pub train_dropout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 512,
            optimizer: AdamConfig::default(),
            val_fraction: 0.2,
            seed: 0,
            split: SplitStrategy::Sample,
            train_dropout: true,
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train.val_fraction = {} outside (0, 1)",
                self.val_fraction
            )));
        }
        self.optimizer.validate()
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let o = &self.optimizer;
        [
            ("train.epochs", self.epochs.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.learning_rate", o.learning_rate.to_string()),
            ("train.beta1", o.beta1.to_string()),
            ("train.beta2", o.beta2.to_string()),
            ("train.epsilon", o.epsilon.to_string()),
            ("train.val_fraction", self.val_fraction.to_string()),
            ("train.split", self.split.key().to_string()),
            ("train.dropout_in_training", self.train_dropout.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "train.epochs" => self.epochs = parse_value(key, value)?,
            "train.batch_size" => self.batch_size = parse_value(key, value)?,
            "train.learning_rate" => self.optimizer.learning_rate = parse_value(key, value)?,
            "train.beta1" => self.optimizer.beta1 = parse_value(key, value)?,
            "train.beta2" => self.optimizer.beta2 = parse_value(key, value)?,
            "train.epsilon" => self.optimizer.epsilon = parse_value(key, value)?,
            "train.val_fraction" => self.val_fraction = parse_value(key, value)?,
            "train.split" => self.split = value.trim().parse()?,
            "train.dropout_in_training" => self.train_dropout = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

/// Sample indices on each side of the split, both ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded split of `samples` into training and validation indices.
pub fn split_samples<T>(samples: &[WindowSample<T>], cfg: &TrainConfig) -> Result<Split> {
    cfg.validate()?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 samples, got {n}"
        )));
    }
    let mut rng = rng_for(cfg.seed, stream::SPLIT, 0);
    let want = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1);
    let (mut train, mut val) = match cfg.split {
        SplitStrategy::Sample => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let train = idx.split_off(want);
            (train, idx)
        }
        SplitStrategy::Trajectory => {
            let mut ids: Vec<usize> = samples.iter().map(|s| s.trajectory).collect();
            ids.sort_unstable();
            ids.dedup();
            ids.shuffle(&mut rng);
            let mut held = std::collections::BTreeSet::new();
            let mut count = 0;
            for id in ids {
                if count >= want {
                    break;
                }
                held.insert(id);
                count += samples.iter().filter(|s| s.trajectory == id).count();
            }
            (0..n).partition(|&i| !held.contains(&samples[i].trajectory))
        }
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(format!(
            "split left {} training and {} validation samples",
            train.len(),
            val.len()
        )));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(Split { train, val })
}

/// Per-sample MSE and parameter gradients, in parameter order.
pub fn sample_gradient<T: Scalar>(
    model: &Cg3dModel<T>,
    sample: &WindowSample<T>,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(T, Vec<Vec<T>>)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let mut rng = rng_for(dropout_seed, stream::DROPOUT, 0);
    let pred = model.forward_on(&mut tape, &bound, &sample.input, mode, &mut rng)?;
    let target = tape.constant(sample.target.clone());
    let loss = tape.mse(pred, target)?;
    tape.backward(loss)?;
    let grads = bound
        .vars()
        .into_iter()
        .map(|v| {
            tape.grad(v)
                .map(<[T]>::to_vec)
                .unwrap_or_else(|| vec![T::zero(); tape.value(v).len()])
        })
        .collect();
    Ok((tape.value(loss).item(), grads))
}

/// Mean loss and mean gradient over a batch. Samples run in parallel;
/// the reduction follows batch order so results do not depend on
/// scheduling.
pub fn batch_gradient<T: Scalar>(
    model: &Cg3dModel<T>,
    batch: &[(&WindowSample<T>, u64)],
    mode: Mode,
) -> Result<(T, Vec<Vec<T>>)> {
    let parts: Vec<(T, Vec<Vec<T>>)> = batch
        .par_iter()
        .map(|(s, seed)| sample_gradient(model, s, mode, *seed))
        .collect::<Result<_>>()?;
    let scale = T::one() / T::from_usize_lossy(batch.len());
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter
        .next()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    for (l, g) in iter {
        loss = loss + l;
        for (acc, part) in grads.iter_mut().zip(g) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a = *a + b);
        }
    }
    grads.iter_mut().flatten().for_each(|g| *g = *g * scale);
    Ok((loss * scale, grads))
}

/// Eval-mode predictions, one `[horizon, 4]` tensor per sample.
pub fn predict_all<T: Scalar>(
    model: &Cg3dModel<T>,
    samples: &[&WindowSample<T>],
) -> Result<Vec<Tensor<T>>> {
    samples
        .par_iter()
        .map(|s| model.predict(&s.input))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub split: Split,
}

pub const HISTORY_HEADER: &str = "epoch,train_mse,val_mse,val_mae";

pub fn write_history<W: Write>(history: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{}",
            r.epoch, r.train_mse, r.val_mse, r.val_mae
        )?;
    }
    Ok(())
}

/// Trains `model` in place; the result is the last epoch's parameters.
pub fn train<T: Scalar>(
    model: &mut Cg3dModel<T>,
    samples: &[WindowSample<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let split = split_samples(samples, cfg)?;
    train_on_split(model, samples, split, cfg)
}

pub fn train_on_split<T: Scalar>(
    model: &mut Cg3dModel<T>,
    samples: &[WindowSample<T>],
    split: Split,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut adam = Adam::new(cfg.optimizer, model);
    let mode = if cfg.train_dropout {
        Mode::Train
    } else {
        Mode::Eval
    };
    let val: Vec<&WindowSample<T>> = split.val.iter().map(|&i| &samples[i]).collect();
    let val_targets: Vec<Tensor<T>> = val.iter().map(|s| s.target.clone()).collect();
    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng_for(cfg.seed, stream::SHUFFLE, epoch as u64));
        let epoch_seed = derive_seed(cfg.seed, stream::DROPOUT, epoch as u64);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&WindowSample<T>, u64)> = chunk
                .iter()
                .map(|&i| (&samples[i], derive_seed(epoch_seed, 0, i as u64)))
                .collect();
            let (loss, grads) = batch_gradient(model, &batch, mode)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b + 1,
                    reason: format!("loss is {loss}"),
                });
            }
            adam.step(model, &grads, epoch, b + 1)?;
            loss_sum += loss.to_f64_lossy() * chunk.len() as f64;
        }
        let preds = predict_all(model, &val)?;
        let m = compute_metrics(&preds, &val_targets)?;
        history.push(EpochRecord {
            epoch,
            train_mse: loss_sum / order.len() as f64,
            val_mse: m.mse,
            val_mae: m.mae,
        });
    }
    Ok(TrainOutcome { history, split })
}

/// Sum of squared parameter values; handy for spotting untouched models.
pub fn parameter_norm_sq<T: Scalar>(model: &Cg3dModel<T>) -> f64 {
    model
        .parameters()
        .iter()
        .flat_map(|(_, t)| t.data().iter())
        .map(|v| v.to_f64_lossy().powi(2))
        .sum()
}
