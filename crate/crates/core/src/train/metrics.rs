use serde::Serialize;

use crate::error::{Error, Result};
use crate::preprocess::WindowSample;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Error summary over every predicted element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
}

/// MAE and RMSE over all elements of all pairs. Fails with an invariant
/// error if RMSE < MAE beyond rounding, which would indicate corrupted
/// accumulation.
pub fn compute_metrics<T: Scalar>(preds: &[Tensor<T>], targets: &[Tensor<T>]) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(Error::Contract("metrics over zero predictions".into()));
    }
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let (mut abs, mut sq, mut n) = (0.0f64, 0.0f64, 0usize);
    for (p, t) in preds.iter().zip(targets) {
        if p.shape() != t.shape() {
            return Err(Error::Shape(format!(
                "prediction {:?} vs target {:?}",
                p.shape(),
                t.shape()
            )));
        }
        for (&a, &b) in p.data().iter().zip(t.data()) {
            let e = (a - b).to_f64_lossy();
            abs += e.abs();
            sq += e * e;
        }
        n += p.len();
    }
    let mae = abs / n as f64;
    let mse = sq / n as f64;
    let rmse = mse.sqrt();
    if !(rmse >= mae - 1e-12 * (1.0 + mae)) {
        return Err(Error::Invariant(format!("rmse {rmse} < mae {mae}")));
    }
    Ok(Metrics { n, mae, rmse, mse })
}

/// Repeats the last observed target row for every horizon step.
pub fn persistence_prediction<T: Scalar>(sample: &WindowSample<T>) -> Tensor<T> {
    let h = sample.target.rows();
    let data = (0..h)
        .flat_map(|_| sample.last_observed.iter().copied())
        .collect();
    Tensor::new(vec![h, sample.last_observed.len()], data).expect("target rows are non-empty")
}
