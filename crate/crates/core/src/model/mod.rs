//! The continuous-time Fourier neural operator.

mod config;
mod forward;
mod params;
mod stabilize;
mod time;

pub use config::CtfnoConfig;
pub use forward::{
    record_layer, record_network, record_time_features, Ctfno, LayerSlots, ParamSlots, TimeFeatures,
};
pub use params::{CtfnoParams, LayerParams, TimeEncoder};
pub use stabilize::{
    gershgorin_normalize, is_feasible, kernel_spectral_norm, max_kernel_row_l1, max_row_l1,
    normalize_kernel_rows, normalize_matrix_rows, spectral_norm, spectral_norm_complex,
};
pub use time::{embed_frequencies, embed_times, record_encoder, sinusoidal_embed, time_encode, EncoderSlots};
