//! Layer primitives built on the tape: convolution layers, the GRU cell,
//! dense layers and dropout.
//!
//! Every layer owns its parameters as plain tensors. `bind` copies them onto
//! a tape as trainable leaves and returns the handles used for the forward
//! pass; gradients are read back through the same handles.

mod conv;
mod dense;
mod dropout;
mod gru;
mod init;

pub use conv::{Conv2dLayer, Conv3dLayer, ConvVars};
pub use dense::{DenseLayer, DenseVars};
pub use dropout::{DropoutSpec, Mode};
pub use gru::{GruCell, GruSequence, GruStep, GruVars};
pub use init::glorot_uniform;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named parameter listing, in a fixed order shared by `parameters`,
/// `parameters_mut` and the bound variable lists.
pub trait Parameterized<T: Scalar> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }
}
