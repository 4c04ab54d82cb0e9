use super::params::TimeEncoder;
use crate::autograd::{Slot, Tape};
use crate::error::Result;
use crate::scalar::Real;
use crate::spectral::{Activation, Tensor};

/// Frequencies `omega_i = 10^(-4i/m)` for `i = 0..m`.
pub fn embed_frequencies(m: usize) -> Vec<f64> {
    (0..m).map(|i| 10f64.powf(-4.0 * i as f64 / m as f64)).collect()
}

/// Interleaved `(sin(omega_i t), cos(omega_i t))` pairs, length `2m`.
pub fn sinusoidal_embed<T: Real>(t: T, m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * m);
    for w in embed_frequencies(m) {
        let arg = T::lit(w) * t;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    out
}

/// Stacked embeddings, `[times.len(), 2m]`.
pub fn embed_times<T: Real>(times: &[T], m: usize) -> Tensor<T> {
    let data = times.iter().flat_map(|&t| sinusoidal_embed(t, m)).collect();
    Tensor::new(vec![times.len(), 2 * m], data).expect("2m entries per time")
}

/// Tape slots of one encoder's `(w1, b1, w2, b2)`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderSlots {
    pub w1: Slot,
    pub b1: Slot,
    pub w2: Slot,
    pub b2: Slot,
}

/// `w2 silu(w1 e + b1) + b2` row-wise over an embedding `[B, 2m]`.
pub fn record_encoder<T: Real>(tape: &mut Tape<T>, enc: &EncoderSlots, embed: Slot) -> Result<Slot> {
    let h = tape.channel_mix(embed, enc.w1)?;
    let h = tape.add_bias(h, enc.b1)?;
    let h = tape.activation(h, Activation::Silu)?;
    let h = tape.channel_mix(h, enc.w2)?;
    tape.add_bias(h, enc.b2)
}

/// Evaluates an encoder at a single time without recording gradients.
pub fn time_encode<T: Real>(enc: &TimeEncoder<T>, t: T) -> Vec<T> {
    let e = sinusoidal_embed(t, enc.w1.shape()[1] / 2);
    let affine = |w: &Tensor<T>, b: &Tensor<T>, x: &[T]| -> Vec<T> {
        let cols = w.shape()[1];
        w.data()
            .chunks_exact(cols)
            .zip(b.data())
            .map(|(row, &bias)| row.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>() + bias)
            .collect()
    };
    let h: Vec<T> = affine(&enc.w1, &enc.b1, &e).into_iter().map(|v| Activation::Silu.apply(v)).collect();
    affine(&enc.w2, &enc.b2, &h)
}
