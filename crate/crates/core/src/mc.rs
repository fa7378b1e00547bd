//! Monte Carlo dropout: repeated stochastic forward passes whose spread
//! estimates model uncertainty.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Cg3dModel;
use crate::nn::Mode;
use crate::scalar::Scalar;
use crate::seed::{rng_for, stream};
use crate::tensor::Tensor;

pub const DEFAULT_MC_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct McPrediction<T> {
    pub mean: Tensor<T>,
    /// Population standard deviation per element.
    pub std: Tensor<T>,
    pub samples: usize,
    pub seed: u64,
}

/// `passes` forward passes in MC mode; pass `k` draws its masks from
/// `(seed, k)`. Passes run in parallel and are folded in index order.
pub fn mc_predict<T: Scalar>(
    model: &Cg3dModel<T>,
    input: &Tensor<T>,
    passes: usize,
    seed: u64,
) -> Result<McPrediction<T>> {
    if passes == 0 {
        return Err(Error::Contract("MC dropout needs at least one pass".into()));
    }
    let outs: Vec<Tensor<T>> = (0..passes)
        .into_par_iter()
        .map(|k| model.forward(input, Mode::Mc, &mut rng_for(seed, stream::MC, k as u64)))
        .collect::<Result<_>>()?;

    // Welford: identical passes leave the spread at exactly zero.
    let shape = outs[0].shape().to_vec();
    let mut mean = vec![T::zero(); outs[0].len()];
    let mut m2 = vec![T::zero(); mean.len()];
    for (k, out) in outs.iter().enumerate() {
        let count = T::from_usize_lossy(k + 1);
        for ((mu, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(out.data()) {
            let delta = x - *mu;
            *mu = *mu + delta / count;
            *s = *s + delta * (x - *mu);
        }
    }
    let n = T::from_usize_lossy(passes);
    let std = m2.iter().map(|&s| (s / n).max(T::zero()).sqrt()).collect();
    Ok(McPrediction {
        mean: Tensor::new(shape.clone(), mean)?,
        std: Tensor::new(shape, std)?,
        samples: passes,
        seed,
    })
}
