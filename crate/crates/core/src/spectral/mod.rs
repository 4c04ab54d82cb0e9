//! Dense tensors, real-input Fourier transforms and pointwise activations.

mod activation;
mod fft;
mod tensor;

pub use activation::{activation, activation_grad, gauss_cdf, gauss_pdf, sigmoid, Activation};
pub use fft::{
    dft_forward, dft_inverse, half_len, irfft_rows, mode_weight, pad_or_truncate_spectrum, resample, rfft_rows,
};
pub use tensor::{Spectrum, Tensor};
