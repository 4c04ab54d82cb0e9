//! Continuous-time Fourier neural operators.
//!
//! The crate bundles a small tensor and FFT layer, a reverse-mode tape for the
//! fixed set of operations the model needs, the time-modulated Fourier
//! operator itself with row-norm stabilization, generators for the benchmark
//! dynamics, and a training / evaluation harness.

pub mod autograd;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod scalar;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use model::{Ctfno, CtfnoConfig, CtfnoParams};
pub use num_complex::Complex;
pub use scalar::Real;
pub use spectral::{Activation, Spectrum, Tensor};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type Ctfno64 = Ctfno<f64>;
pub type Ctfno32 = Ctfno<f32>;
pub type CtfnoParams64 = CtfnoParams<f64>;
