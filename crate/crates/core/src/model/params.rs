use num_complex::Complex;

use super::config::CtfnoConfig;
use crate::autograd::Value;
use crate::data::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Spectrum, Tensor};

/// Stream index reserved for parameter initialization.
const INIT_STREAM: u64 = 0x1000_0000;

/// Two-layer perceptron over the sinusoidal time embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeEncoder<T> {
    /// `[c, 2m]`
    pub w1: Tensor<T>,
    /// `[c]`
    pub b1: Tensor<T>,
    /// `[c, c]`
    pub w2: Tensor<T>,
    /// `[c]`
    pub b2: Tensor<T>,
}

/// Learnable arrays of one continuous-time Fourier layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// Pointwise weight `W`, `[d_v, d_v]` (row = output channel).
    pub weight: Tensor<T>,
    /// `[d_v]`
    pub bias: Tensor<T>,
    /// Fourier kernel `R`, `[k, d_v, d_v]`; output rows `i*d_k..(i+1)*d_k` form head `i`.
    pub kernel: Spectrum<T>,
    /// Mode modulation table `A`, `[h, k, c]`.
    pub time_modes: Spectrum<T>,
    /// Channel modulation `B`, `[d_v, c]`.
    pub channel_mod: Tensor<T>,
}

/// All learnable arrays, in canonical order: `phi` encoder, `psi` encoder,
/// lifting `P`, each layer (`W`, `b`, `R`, `A`, `B`), projection `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfnoParams<T> {
    pub phi_enc: TimeEncoder<T>,
    pub psi_enc: TimeEncoder<T>,
    /// `[d_v, d_a]`
    pub lift: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    /// `[d_u, d_v]`
    pub proj: Tensor<T>,
}

fn uniform_tensor<T: Real>(shape: &[usize], fan_in: usize, rng: &mut RngStream) -> Tensor<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::lit(rng.uniform_in(-bound, bound)))
}

fn normal_spectrum<T: Real>(shape: &[usize], var: f64, rng: &mut RngStream) -> Spectrum<T> {
    let sd = var.sqrt();
    Spectrum::from_fn(shape, |_| {
        let re = rng.normal() * sd;
        let im = rng.normal() * sd;
        Complex::new(T::lit(re), T::lit(im))
    })
}

impl<T: Real> TimeEncoder<T> {
    fn init(config: &CtfnoConfig, rng: &mut RngStream) -> Self {
        let (c, e) = (config.time_hidden, 2 * config.time_sinusoid);
        Self {
            w1: uniform_tensor(&[c, e], e, rng),
            b1: uniform_tensor(&[c], e, rng),
            w2: uniform_tensor(&[c, c], c, rng),
            b2: uniform_tensor(&[c], c, rng),
        }
    }

    fn values(&self) -> [Value<T>; 4] {
        [
            self.w1.clone().into(),
            self.b1.clone().into(),
            self.w2.clone().into(),
            self.b2.clone().into(),
        ]
    }
}

impl<T: Real> CtfnoParams<T> {
    /// Seeded initialization.
    ///
    /// Real matrices (`W`, `B`, `P`, `Q`, encoder weights and biases) are
    /// uniform on `±1/sqrt(fan_in)`; layer biases start at zero. `R` has
    /// independent normal real and imaginary parts of variance
    /// `1/(d_v k_max)`; `A` uses variance `1/(2c)` per part so that the mode
    /// modulation starts with unit variance.
    pub fn init(config: &CtfnoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(seed, INIT_STREAM);
        let (dv, c, k, h) = (config.width, config.time_hidden, config.modes, config.heads);
        let phi_enc = TimeEncoder::init(config, &mut rng);
        let psi_enc = TimeEncoder::init(config, &mut rng);
        let lift = uniform_tensor(&[dv, config.in_channels], config.in_channels, &mut rng);
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                weight: uniform_tensor(&[dv, dv], dv, &mut rng),
                bias: Tensor::zeros(&[dv]),
                kernel: normal_spectrum(&[k, dv, dv], 1.0 / (dv * k) as f64, &mut rng),
                time_modes: normal_spectrum(&[h, k, c], 1.0 / (2 * c) as f64, &mut rng),
                channel_mod: uniform_tensor(&[dv, c], c, &mut rng),
            })
            .collect();
        let proj = uniform_tensor(&[config.out_channels, dv], dv, &mut rng);
        Ok(Self { phi_enc, psi_enc, lift, layers, proj })
    }

    /// Parameters with every array zero.
    pub fn zeros(config: &CtfnoConfig) -> Self {
        let shapes = Self::shapes(config);
        let values = shapes
            .into_iter()
            .map(|(shape, complex)| {
                if complex {
                    Value::Complex(Spectrum::zeros(&shape))
                } else {
                    Value::Real(Tensor::zeros(&shape))
                }
            })
            .collect();
        Self::from_values(config, values).expect("canonical shapes")
    }

    /// Canonical `(shape, is_complex)` list.
    pub fn shapes(config: &CtfnoConfig) -> Vec<(Vec<usize>, bool)> {
        let (dv, c, k, h) = (config.width, config.time_hidden, config.modes, config.heads);
        let e = 2 * config.time_sinusoid;
        let enc = [(vec![c, e], false), (vec![c], false), (vec![c, c], false), (vec![c], false)];
        let mut out = Vec::with_capacity(11 + 5 * config.layers);
        out.extend(enc.iter().cloned());
        out.extend(enc.iter().cloned());
        out.push((vec![dv, config.in_channels], false));
        for _ in 0..config.layers {
            out.push((vec![dv, dv], false));
            out.push((vec![dv], false));
            out.push((vec![k, dv, dv], true));
            out.push((vec![h, k, c], true));
            out.push((vec![dv, c], false));
        }
        out.push((vec![config.out_channels, dv], false));
        out
    }

    /// Canonical parameter names, aligned with [`Self::to_values`].
    pub fn names(config: &CtfnoConfig) -> Vec<String> {
        let mut out: Vec<String> = ["phi", "psi"]
            .iter()
            .flat_map(|e| ["w1", "b1", "w2", "b2"].iter().map(move |p| format!("{e}.{p}")))
            .collect();
        out.push("lift".into());
        for l in 0..config.layers {
            for p in ["weight", "bias", "kernel", "time_modes", "channel_mod"] {
                out.push(format!("layer{l}.{p}"));
            }
        }
        out.push("proj".into());
        out
    }

    pub fn to_values(&self) -> Vec<Value<T>> {
        let mut out = Vec::with_capacity(11 + 5 * self.layers.len());
        out.extend(self.phi_enc.values());
        out.extend(self.psi_enc.values());
        out.push(self.lift.clone().into());
        for l in &self.layers {
            out.push(l.weight.clone().into());
            out.push(l.bias.clone().into());
            out.push(l.kernel.clone().into());
            out.push(l.time_modes.clone().into());
            out.push(l.channel_mod.clone().into());
        }
        out.push(self.proj.clone().into());
        out
    }

    /// Rebuilds parameters from canonical-order values, checking every shape.
    pub fn from_values(config: &CtfnoConfig, values: Vec<Value<T>>) -> Result<Self> {
        let shapes = Self::shapes(config);
        if values.len() != shapes.len() {
            return Err(Error::shape(format!("expected {} parameter arrays, got {}", shapes.len(), values.len())));
        }
        for (i, (v, (shape, complex))) in values.iter().zip(&shapes).enumerate() {
            if v.shape() != shape.as_slice() || v.is_complex() != *complex {
                return Err(Error::shape(format!(
                    "parameter {i}: expected {}{shape:?}, got {}{:?}",
                    if *complex { "complex" } else { "real" },
                    if v.is_complex() { "complex" } else { "real" },
                    v.shape()
                )));
            }
        }
        let mut it = values.into_iter();
        let mut real = || match it.next() {
            Some(Value::Real(t)) => t,
            _ => unreachable!("checked above"),
        };
        let phi_enc = TimeEncoder { w1: real(), b1: real(), w2: real(), b2: real() };
        let psi_enc = TimeEncoder { w1: real(), b1: real(), w2: real(), b2: real() };
        let lift = real();
        drop(real);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let mut take = || it.next().expect("checked above");
            let weight = take().as_real()?.clone();
            let bias = take().as_real()?.clone();
            let kernel = take().as_complex()?.clone();
            let time_modes = take().as_complex()?.clone();
            let channel_mod = take().as_real()?.clone();
            layers.push(LayerParams { weight, bias, kernel, time_modes, channel_mod });
        }
        let proj = it.next().expect("checked above").as_real()?.clone();
        Ok(Self { phi_enc, psi_enc, lift, layers, proj })
    }

    /// Concatenation of all parameters as real scalars (complex as re, im pairs).
    pub fn flatten(&self) -> Vec<T> {
        self.to_values().iter().flat_map(|v| v.flat().to_vec()).collect()
    }

    pub fn unflatten(config: &CtfnoConfig, flat: &[T]) -> Result<Self> {
        let expected = config.param_count();
        if flat.len() != expected {
            return Err(Error::shape(format!("expected {expected} parameter scalars, got {}", flat.len())));
        }
        let mut values = Self::zeros(config).to_values();
        let mut at = 0;
        for v in &mut values {
            let dst = v.flat_mut();
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        }
        Self::from_values(config, values)
    }

    /// Makes both time encoders output all-ones and every modulation
    /// (`phi(t)^T A`, `B psi(t)`) equal one, independent of `t`.
    pub fn freeze_time_to_unity(&mut self) {
        for enc in [&mut self.phi_enc, &mut self.psi_enc] {
            enc.w1 = Tensor::zeros(enc.w1.shape());
            enc.b1 = Tensor::zeros(enc.b1.shape());
            enc.w2 = Tensor::zeros(enc.w2.shape());
            enc.b2 = Tensor::filled(enc.b2.shape(), T::one());
        }
        for l in &mut self.layers {
            let c = l.channel_mod.last_dim();
            let inv = T::one() / T::lit(c as f64);
            l.time_modes = l.time_modes.map(|_| Complex::new(inv, T::zero()));
            l.channel_mod = Tensor::filled(l.channel_mod.shape(), inv);
        }
    }

    pub fn cast<U: Real>(&self) -> CtfnoParams<U> {
        let values: Vec<Value<U>> = self
            .to_values()
            .into_iter()
            .map(|v| match v {
                Value::Real(t) => Value::Real(t.cast()),
                Value::Complex(s) => {
                    let flat: Vec<U> = s.as_flat().iter().map(|x| U::lit(x.to_f64_lossy())).collect();
                    Value::Complex(Spectrum::from_flat(s.shape().to_vec(), &flat).expect("same shape"))
                }
            })
            .collect();
        let config = self.implied_config();
        CtfnoParams::from_values(&config, values).expect("same shapes")
    }

    /// Shape-only configuration recovered from the arrays (activation and
    /// stabilization fields are defaults).
    fn implied_config(&self) -> CtfnoConfig {
        let first = &self.layers[0];
        CtfnoConfig {
            layers: self.layers.len(),
            modes: first.kernel.shape()[0],
            width: self.lift.shape()[0],
            in_channels: self.lift.shape()[1],
            out_channels: self.proj.shape()[0],
            time_hidden: self.phi_enc.w1.shape()[0],
            time_sinusoid: self.phi_enc.w1.shape()[1] / 2,
            heads: first.time_modes.shape()[0],
            padding: 0,
            stabilization: None,
            activation: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Activation;

    fn cfg() -> CtfnoConfig {
        CtfnoConfig {
            layers: 3,
            modes: 4,
            width: 16,
            in_channels: 1,
            out_channels: 1,
            time_hidden: 32,
            time_sinusoid: 16,
            heads: 2,
            padding: 0,
            stabilization: None,
            activation: Activation::Gelu,
        }
    }

    #[test]
    fn count_matches_shape_walk() {
        let c = cfg();
        let p = CtfnoParams::<f64>::init(&c, 1).unwrap();
        let walked: usize = p.to_values().iter().map(|v| v.real_len()).sum();
        assert_eq!(walked, c.param_count());
        assert_eq!(p.flatten().len(), c.param_count());
        assert_eq!(CtfnoParams::<f64>::names(&c).len(), p.to_values().len());
    }

    #[test]
    fn flatten_round_trip() {
        let c = cfg();
        let p = CtfnoParams::<f64>::init(&c, 9).unwrap();
        let q = CtfnoParams::unflatten(&c, &p.flatten()).unwrap();
        assert_eq!(p, q);
        assert!(CtfnoParams::<f64>::unflatten(&c, &p.flatten()[1..]).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let c = cfg();
        let a = CtfnoParams::<f64>::init(&c, 3).unwrap();
        let b = CtfnoParams::<f64>::init(&c, 3).unwrap();
        let d = CtfnoParams::<f64>::init(&c, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        let bound = 1.0 / 16f64.sqrt();
        assert!(a.layers[0].weight.max_abs() <= bound);
        assert_eq!(a.layers[0].bias.max_abs(), 0.0);
    }

    #[test]
    fn from_values_rejects_wrong_kind() {
        let c = cfg();
        let mut v = CtfnoParams::<f64>::init(&c, 1).unwrap().to_values();
        v[0] = Value::Complex(Spectrum::zeros(&[32, 32]));
        assert!(CtfnoParams::from_values(&c, v).is_err());
    }

    #[test]
    fn cast_preserves_values() {
        let c = cfg();
        let p = CtfnoParams::<f64>::init(&c, 2).unwrap();
        let q: CtfnoParams<f32> = p.cast();
        for (a, b) in p.flatten().iter().zip(q.flatten()) {
            assert!((a - b as f64).abs() < 1e-7);
        }
    }
}
