//! Four-dimensional flight-trajectory forecasting from ADS-B state vectors.
//!
//! The numeric core (tensors, layers, splines, PCA, the CG3D model and its
//! training loop) is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the file formats and the command-line tool use.

pub mod adsb;
pub mod container;
pub mod error;
pub mod gradcheck;
pub mod mc;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod scalar;
pub mod seed;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Activation, Var};

pub type Tensor = tensor::Tensor<f64>;
pub type Tape = tensor::Tape<f64>;
pub type GruCell = nn::GruCell<f64>;
pub type PcaModel = preprocess::PcaModel<f64>;
pub type NaturalCubicSpline = preprocess::NaturalCubicSpline<f64>;
pub type WindowSample = preprocess::WindowSample<f64>;
pub type Cg3dModel = model::Cg3dModel<f64>;
pub type McPrediction = mc::McPrediction<f64>;
