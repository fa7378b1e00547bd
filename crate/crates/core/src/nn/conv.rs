use rand::Rng;

use super::{glorot_uniform, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Activation, Tape, Tensor, Var};

/// Tape handles of a bound convolution layer.
#[derive(Clone, Copy, Debug)]
pub struct ConvVars {
    pub kernels: Var,
    pub bias: Var,
    pub activation: Activation,
    rank3d: bool,
}

impl ConvVars {
    pub fn vars(&self) -> Vec<Var> {
        vec![self.kernels, self.bias]
    }

    /// `activation(conv(input, kernels) + bias)`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, input: Var) -> Result<Var> {
        let pre = if self.rank3d {
            tape.conv3d(input, self.kernels, self.bias)?
        } else {
            tape.conv2d(input, self.kernels, self.bias)?
        };
        Ok(tape.activate(pre, self.activation))
    }
}

fn check_bias<T: Scalar>(kernels: &Tensor<T>, bias: &Tensor<T>) -> Result<()> {
    if bias.shape() != [kernels.shape()[0]] {
        return Err(Error::Shape(format!(
            "bias shape {:?} does not match {} output channels",
            bias.shape(),
            kernels.shape()[0]
        )));
    }
    Ok(())
}

/// 2D convolution layer over `[channels, height, width]` feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dLayer<T> {
    /// `[out_ch, in_ch, p, q]`
    pub kernels: Tensor<T>,
    /// `[out_ch]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> Conv2dLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if kernels.rank() != 4 {
            return Err(Error::Shape(format!(
                "conv2d kernels must be [out,in,p,q], got {:?}",
                kernels.shape()
            )));
        }
        check_bias(&kernels, &bias)?;
        Ok(Conv2dLayer {
            kernels,
            bias,
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let (p, q) = kernel;
        let area = p * q;
        Conv2dLayer {
            kernels: glorot_uniform(
                &[out_channels, in_channels, p, q],
                in_channels * area,
                out_channels * area,
                rng,
            ),
            bias: Tensor::zeros(vec![out_channels]),
            activation,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    /// `(p, q)`
    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.shape()[2], self.kernels.shape()[3])
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> ConvVars {
        ConvVars {
            kernels: tape.param(self.kernels.clone()),
            bias: tape.param(self.bias.clone()),
            activation: self.activation,
            rank3d: false,
        }
    }

    /// Binds the layer and runs it on `input` in one go.
    pub fn forward(&self, tape: &mut Tape<T>, input: Var) -> Result<Var> {
        self.bind(tape).forward(tape, input)
    }
}

impl<T: Scalar> Parameterized<T> for Conv2dLayer<T> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("kernels", &self.kernels), ("bias", &self.bias)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

/// 3D convolution layer over `[channels, depth, height, width]` volumes.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3dLayer<T> {
    /// `[out_ch, in_ch, r, p, q]`
    pub kernels: Tensor<T>,
    /// `[out_ch]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> Conv3dLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if kernels.rank() != 5 {
            return Err(Error::Shape(format!(
                "conv3d kernels must be [out,in,r,p,q], got {:?}",
                kernels.shape()
            )));
        }
        check_bias(&kernels, &bias)?;
        Ok(Conv3dLayer {
            kernels,
            bias,
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize, usize),
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let (r, p, q) = kernel;
        let vol = r * p * q;
        Conv3dLayer {
            kernels: glorot_uniform(
                &[out_channels, in_channels, r, p, q],
                in_channels * vol,
                out_channels * vol,
                rng,
            ),
            bias: Tensor::zeros(vec![out_channels]),
            activation,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    /// `(r, p, q)`
    pub fn kernel_size(&self) -> (usize, usize, usize) {
        let s = self.kernels.shape();
        (s[2], s[3], s[4])
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> ConvVars {
        ConvVars {
            kernels: tape.param(self.kernels.clone()),
            bias: tape.param(self.bias.clone()),
            activation: self.activation,
            rank3d: true,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, input: Var) -> Result<Var> {
        self.bind(tape).forward(tape, input)
    }
}

impl<T: Scalar> Parameterized<T> for Conv3dLayer<T> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("kernels", &self.kernels), ("bias", &self.bias)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.kernels, &mut self.bias]
    }
}
