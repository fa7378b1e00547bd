use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};

/// Forward-pass regime. `Mc` keeps dropout stochastic at prediction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
    Mc,
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` so the
/// expectation is preserved and evaluation needs no rescaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutSpec<T> {
    pub rate: T,
    pub mode: Mode,
}

impl<T: Scalar> DropoutSpec<T> {
    pub fn new(rate: T, mode: Mode) -> Result<Self> {
        if !(rate >= T::zero() && rate < T::one()) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(DropoutSpec { rate, mode })
    }

    pub fn is_active(&self) -> bool {
        self.mode != Mode::Eval && self.rate > T::zero()
    }

    /// Draws a mask of `n` entries, each `0` or `1 / (1 - rate)`.
    pub fn sample_mask<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        let keep = T::one() / (T::one() - self.rate);
        let p = self.rate.to_f64_lossy();
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect()
    }

    /// Inactive specs return `x` itself, so eval mode is an exact identity.
    pub fn forward<R: Rng + ?Sized>(&self, tape: &mut Tape<T>, x: Var, rng: &mut R) -> Result<Var> {
        if !self.is_active() {
            return Ok(x);
        }
        let mask = self.sample_mask(tape.value(x).len(), rng);
        tape.mask(x, mask)
    }
}
