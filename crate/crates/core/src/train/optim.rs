use crate::error::{Error, Result};
use crate::model::Cg3dModel;
use crate::nn::Parameterized;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "train.learning_rate = {} is invalid",
                self.learning_rate
            )));
        }
        for (k, b) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{k} = {b} outside [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("train.epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Bias-corrected adaptive moment estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub steps: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, model: &Cg3dModel<T>) -> Self {
        Self::for_shapes(config, model.parameters().iter().map(|(_, t)| t.len()))
    }

    pub fn for_shapes(config: AdamConfig, lens: impl IntoIterator<Item = usize>) -> Self {
        let zeros: Vec<Vec<T>> = lens.into_iter().map(|n| vec![T::zero(); n]).collect();
        Adam {
            config,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    pub fn step(
        &mut self,
        model: &mut Cg3dModel<T>,
        grads: &[Vec<T>],
        epoch: usize,
        batch: usize,
    ) -> Result<()> {
        self.step_tensors(model.parameters_mut(), grads, epoch, batch)
    }

    /// Applies one update. Non-finite gradients abort with a divergence
    /// error before anything is modified.
    pub fn step_tensors(
        &mut self,
        params: Vec<&mut Tensor<T>>,
        grads: &[Vec<T>],
        epoch: usize,
        batch: usize,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "{} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!(
                    "gradient {i} has {} entries for {}",
                    g.len(),
                    p.len()
                )));
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    reason: format!("gradient {i} contains {bad}"),
                });
            }
        }
        self.steps += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);
        let t = self.steps as i32;
        let fix1 = T::one() - T::lit(c.beta1.powi(t));
        let fix2 = T::one() - T::lit(c.beta2.powi(t));
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                let gk = g[k];
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                let m_hat = m[k] / fix1;
                let v_hat = v[k] / fix2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
