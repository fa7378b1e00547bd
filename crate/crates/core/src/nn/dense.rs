use rand::Rng;

use super::{glorot_uniform, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Activation, Tape, Tensor, Var};

/// Fully connected layer `activation(W x + b)` on rank-1 inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug)]
pub struct DenseVars {
    pub weight: Var,
    pub bias: Var,
    pub activation: Activation,
}

impl DenseVars {
    pub fn vars(&self) -> Vec<Var> {
        vec![self.weight, self.bias]
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let wx = tape.matmul(self.weight, x)?;
        let pre = tape.add(wx, self.bias)?;
        Ok(tape.activate(pre, self.activation))
    }
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::Shape(format!(
                "dense weight {:?} and bias {:?} disagree",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        DenseLayer {
            weight: glorot_uniform(&[output, input], input, output, rng),
            bias: Tensor::zeros(vec![output]),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> DenseVars {
        DenseVars {
            weight: tape.param(self.weight.clone()),
            bias: tape.param(self.bias.clone()),
            activation: self.activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        self.bind(tape).forward(tape, x)
    }
}

impl<T: Scalar> Parameterized<T> for DenseLayer<T> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
