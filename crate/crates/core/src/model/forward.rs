use super::config::CtfnoConfig;
use super::params::CtfnoParams;
use super::stabilize::gershgorin_normalize;
use super::time::{embed_times, record_encoder, EncoderSlots};
use crate::autograd::{Slot, Tape, Value};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Spectrum, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct LayerSlots {
    pub weight: Slot,
    pub bias: Slot,
    pub kernel: Slot,
    pub time_modes: Slot,
    pub channel_mod: Slot,
}

/// Tape slots of every parameter, mirroring [`CtfnoParams`].
#[derive(Debug, Clone)]
pub struct ParamSlots {
    pub phi_enc: EncoderSlots,
    pub psi_enc: EncoderSlots,
    pub lift: Slot,
    pub layers: Vec<LayerSlots>,
    pub proj: Slot,
}

impl ParamSlots {
    /// Records `params` on `tape` in canonical order, as trainable leaves or constants.
    pub fn record<T: Real>(tape: &mut Tape<T>, params: &CtfnoParams<T>, trainable: bool) -> Self {
        let slots: Vec<Slot> = params.to_values().into_iter().map(|v| tape.leaf(v, trainable)).collect();
        Self::from_canonical(&slots)
    }

    /// Inverse of [`Self::canonical`].
    pub fn from_canonical(s: &[Slot]) -> Self {
        let enc = |o: usize| EncoderSlots { w1: s[o], b1: s[o + 1], w2: s[o + 2], b2: s[o + 3] };
        let layers = s[9..s.len() - 1]
            .chunks_exact(5)
            .map(|c| LayerSlots { weight: c[0], bias: c[1], kernel: c[2], time_modes: c[3], channel_mod: c[4] })
            .collect();
        Self { phi_enc: enc(0), psi_enc: enc(4), lift: s[8], layers, proj: s[s.len() - 1] }
    }

    pub fn canonical(&self) -> Vec<Slot> {
        let mut out = Vec::with_capacity(10 + 5 * self.layers.len());
        for e in [&self.phi_enc, &self.psi_enc] {
            out.extend([e.w1, e.b1, e.w2, e.b2]);
        }
        out.push(self.lift);
        for l in &self.layers {
            out.extend([l.weight, l.bias, l.kernel, l.time_modes, l.channel_mod]);
        }
        out.push(self.proj);
        out
    }
}

/// Time features shared by all layers: `phi(t)` and `psi(t)` as `[B, c]` slots.
#[derive(Debug, Clone, Copy)]
pub struct TimeFeatures {
    pub phi: Slot,
    pub psi: Slot,
}

pub fn record_time_features<T: Real>(
    tape: &mut Tape<T>,
    config: &CtfnoConfig,
    slots: &ParamSlots,
    times: &[T],
) -> Result<TimeFeatures> {
    let e = tape.constant(embed_times(times, config.time_sinusoid));
    let phi = record_encoder(tape, &slots.phi_enc, e)?;
    let psi = record_encoder(tape, &slots.psi_enc, e)?;
    Ok(TimeFeatures { phi, psi })
}

/// One continuous-time Fourier layer on a channels-first `[Bx, d_v, n]` slot.
///
/// `sigma(W (s * v) + b + irfft(phi_l * (R . rfft v)))` with
/// `s = B psi(t)` per channel and `phi_l = phi(t)^T A` per head and mode.
/// `Bx` may be 1 (shared input) or equal the time batch. With
/// stabilization, `s` is clamped to `[-1, 1]` and `phi_l` to the unit disc.
pub fn record_layer<T: Real>(
    tape: &mut Tape<T>,
    config: &CtfnoConfig,
    layer: &LayerSlots,
    time: TimeFeatures,
    v: Slot,
) -> Result<Slot> {
    let n = tape.real(v)?.last_dim();
    let mut s = tape.channel_mix(time.psi, layer.channel_mod)?;
    let mut modes = tape.time_modes(time.phi, layer.time_modes)?;
    if config.stabilization.is_some() {
        s = tape.clamp_unit(s)?;
        modes = tape.radial_clamp(modes)?;
    }
    let local = tape.channel_scale(v, s)?;
    let local = tape.channel_mix(local, layer.weight)?;
    let local = tape.add_bias(local, layer.bias)?;
    let spec = tape.rfft(v)?;
    let spec = tape.spectral_mix(spec, layer.kernel)?;
    let spec = tape.mode_modulate(spec, modes)?;
    let spectral = tape.irfft(spec, n)?;
    let pre = tape.add(local, spectral)?;
    tape.activation(pre, config.activation)
}

/// Full network for one input function over a batch of times.
///
/// `input` is a channels-first `[1, d_a, n]` slot; returns `[B, d_u, n]`
/// with `B = times.len()`.
pub fn record_network<T: Real>(
    tape: &mut Tape<T>,
    config: &CtfnoConfig,
    slots: &ParamSlots,
    input: Slot,
    times: &[T],
) -> Result<Slot> {
    let n = tape.real(input)?.last_dim();
    config.check_grid(n)?;
    let time = record_time_features(tape, config, slots, times)?;
    let mut v = tape.channel_mix(input, slots.lift)?;
    if config.padding > 0 {
        v = tape.pad(v, config.padding)?;
    }
    for layer in &slots.layers {
        v = record_layer(tape, config, layer, time, v)?;
    }
    if config.padding > 0 {
        v = tape.crop(v, n)?;
    }
    tape.channel_mix(v, slots.proj)
}

/// A configured model with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctfno<T> {
    config: CtfnoConfig,
    params: CtfnoParams<T>,
}

impl<T: Real> Ctfno<T> {
    pub fn new(config: CtfnoConfig, params: CtfnoParams<T>) -> Result<Self> {
        config.validate()?;
        // round trip through the canonical list validates every shape
        let params = CtfnoParams::from_values(&config, params.to_values())?;
        Ok(Self { config, params })
    }

    /// Seeded initialization, projected onto the constraint set when stabilized.
    pub fn init(config: CtfnoConfig, seed: u64) -> Result<Self> {
        let params = CtfnoParams::init(&config, seed)?;
        let mut model = Self { config, params };
        model.project();
        Ok(model)
    }

    pub fn config(&self) -> &CtfnoConfig {
        &self.config
    }

    pub fn params(&self) -> &CtfnoParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut CtfnoParams<T> {
        &mut self.params
    }

    pub fn into_parts(self) -> (CtfnoConfig, CtfnoParams<T>) {
        (self.config, self.params)
    }

    /// Applies the row-norm projection if stabilization is configured.
    pub fn project(&mut self) {
        if let Some(m) = self.config.stabilization {
            gershgorin_normalize(&mut self.params, T::lit(m));
        }
    }

    /// Evaluates `a: [batch, grid, d_a]` at every time, giving
    /// `[batch, times.len(), grid, d_u]`. Each time is evaluated independently.
    pub fn forward(&self, a: &Tensor<T>, times: &[T]) -> Result<Tensor<T>> {
        let (batch, grid, da) = match *a.shape() {
            [b, g, c] => (b, g, c),
            _ => return Err(Error::shape(format!("forward: input must be [batch, grid, channels], got {:?}", a.shape()))),
        };
        if da != self.config.in_channels {
            return Err(Error::shape(format!("forward: {da} input channels, model expects {}", self.config.in_channels)));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("forward: non-finite time".into()));
        }
        self.config.check_grid(grid)?;
        let du = self.config.out_channels;
        let mut out = Vec::with_capacity(batch * times.len() * grid * du);
        if times.is_empty() {
            return Tensor::new(vec![batch, 0, grid, du], out);
        }
        for b in 0..batch {
            let y = self.forward_one(&a.data()[b * grid * da..(b + 1) * grid * da], grid, times)?;
            // [B, d_u, n] -> [B, n, d_u]
            out.extend_from_slice(y.transpose_last2()?.data());
        }
        Tensor::new(vec![batch, times.len(), grid, du], out)
    }

    /// Channels-first output `[times.len(), d_u, grid]` for one channels-last input.
    fn forward_one(&self, a: &[T], grid: usize, times: &[T]) -> Result<Tensor<T>> {
        let da = self.config.in_channels;
        let x = Tensor::new(vec![1, grid, da], a.to_vec())?.transpose_last2()?;
        let mut tape = Tape::new();
        let slots = ParamSlots::record(&mut tape, &self.params, false);
        let input = tape.constant(x);
        let y = record_network(&mut tape, &self.config, &slots, input, times)?;
        Ok(tape.real(y)?.clone())
    }

    /// Applies layer `layer` at time `t` to `v: [batch, grid, d_v]`.
    pub fn layer_forward(&self, v: &Tensor<T>, t: T, layer: usize) -> Result<Tensor<T>> {
        let (batch, grid, dv) = match *v.shape() {
            [b, g, c] => (b, g, c),
            _ => return Err(Error::shape(format!("layer_forward: expected [batch, grid, d_v], got {:?}", v.shape()))),
        };
        if dv != self.config.width || layer >= self.config.layers {
            return Err(Error::shape(format!("layer_forward: width {dv} / layer {layer} for {:?}", self.config)));
        }
        if grid < 2 * self.config.modes {
            return Err(Error::config(format!("grid {grid} is smaller than 2 x {} modes", self.config.modes)));
        }
        let mut tape = Tape::new();
        let slots = ParamSlots::record(&mut tape, &self.params, false);
        let times = vec![t; batch];
        let time = record_time_features(&mut tape, &self.config, &slots, &times)?;
        let x = tape.constant(v.transpose_last2()?);
        let y = record_layer(&mut tape, &self.config, &slots.layers[layer], time, x)?;
        tape.real(y)?.transpose_last2()
    }

    /// Per-layer time factors at `t`: the channel scaling `s` (`[d_v]`) and the
    /// mode modulation `phi_l` (`[heads, modes]`), clamped when stabilized.
    pub fn layer_time_factors(&self, t: T) -> Result<Vec<(Tensor<T>, Spectrum<T>)>> {
        let mut tape = Tape::new();
        let slots = ParamSlots::record(&mut tape, &self.params, false);
        let time = record_time_features(&mut tape, &self.config, &slots, &[t])?;
        let mut out = Vec::with_capacity(self.config.layers);
        for layer in &slots.layers {
            let mut s = tape.channel_mix(time.psi, layer.channel_mod)?;
            let mut modes = tape.time_modes(time.phi, layer.time_modes)?;
            if self.config.stabilization.is_some() {
                s = tape.clamp_unit(s)?;
                modes = tape.radial_clamp(modes)?;
            }
            let s = tape.real(s)?.clone().reshape(&[self.config.width])?;
            let m = tape.complex(modes)?.clone().reshape(&[self.config.heads, self.config.modes])?;
            out.push((s, m));
        }
        Ok(out)
    }

    /// Records this model's parameters and one trajectory's prediction.
    ///
    /// Returns the canonical parameter slots and the `[B, d_u, n]` output.
    pub fn record_trajectory(
        &self,
        tape: &mut Tape<T>,
        initial: &Tensor<T>,
        times: &[T],
    ) -> Result<(ParamSlots, Slot)> {
        let slots = ParamSlots::record(tape, &self.params, true);
        let input = tape.constant(initial.clone());
        let y = record_network(tape, &self.config, &slots, input, times)?;
        Ok((slots, y))
    }

    /// Replaces the parameters from canonical-order values.
    pub fn set_values(&mut self, values: Vec<Value<T>>) -> Result<()> {
        self.params = CtfnoParams::from_values(&self.config, values)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngStream;
    use crate::spectral::Activation;

    fn cfg() -> CtfnoConfig {
        CtfnoConfig {
            layers: 2,
            modes: 4,
            width: 6,
            in_channels: 2,
            out_channels: 3,
            time_hidden: 5,
            time_sinusoid: 3,
            heads: 2,
            padding: 2,
            stabilization: None,
            activation: Activation::Gelu,
        }
    }

    fn random_input(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = RngStream::new(seed, 0);
        Tensor::from_fn(shape, |_| r.normal())
    }

    #[test]
    fn output_shape() {
        let m = Ctfno::<f64>::init(cfg(), 1).unwrap();
        let a = random_input(&[3, 16, 2], 2);
        let y = m.forward(&a, &[0.0, 0.1, 0.2, 0.5, 1.0]).unwrap();
        assert_eq!(y.shape(), &[3, 5, 16, 3]);
        assert!(y.all_finite());
        let e = m.forward(&a, &[]).unwrap();
        assert_eq!(e.shape(), &[3, 0, 16, 3]);
    }

    #[test]
    fn times_do_not_interact() {
        let m = Ctfno::<f64>::init(cfg(), 1).unwrap();
        let a = random_input(&[1, 16, 2], 3);
        let fwd = m.forward(&a, &[0.1, 0.7, 1.3]).unwrap();
        let rev = m.forward(&a, &[1.3, 0.7, 0.1]).unwrap();
        let block = 16 * 3;
        for i in 0..3 {
            let x = &fwd.data()[i * block..(i + 1) * block];
            let y = &rev.data()[(2 - i) * block..(3 - i) * block];
            assert_eq!(x, y);
        }
    }

    #[test]
    fn grid_too_small() {
        let mut c = cfg();
        c.padding = 0;
        let m = Ctfno::<f64>::init(c, 1).unwrap();
        assert!(matches!(m.forward(&random_input(&[1, 7, 2], 1), &[0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn zero_layer_gives_sigma_zero() {
        let mut m = Ctfno::<f64>::init(cfg(), 1).unwrap();
        for l in &mut m.params_mut().layers {
            l.weight = Tensor::zeros(l.weight.shape());
            l.bias = Tensor::zeros(l.bias.shape());
            l.kernel = crate::spectral::Spectrum::zeros(l.kernel.shape());
        }
        let v = random_input(&[2, 8, 6], 5);
        let y = m.layer_forward(&v, 0.4, 0).unwrap();
        assert_eq!(y.shape(), &[2, 8, 6]);
        assert!(y.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn high_modes_do_not_reach_spectral_path() {
        let mut m = Ctfno::<f64>::init(cfg(), 4).unwrap();
        for l in &mut m.params_mut().layers {
            l.weight = Tensor::zeros(l.weight.shape());
        }
        m.config.activation = Activation::Identity;
        let n = 16;
        // modes 5 and 6 only; k_max = 4
        let v = Tensor::from_fn(&[1, n, 6], |i| {
            let (j, c) = (i / 6, i % 6);
            let x = j as f64 / n as f64;
            (std::f64::consts::TAU * 5.0 * x).cos() + (c as f64) * (std::f64::consts::TAU * 6.0 * x).sin()
        });
        let y = m.layer_forward(&v, 0.2, 1).unwrap();
        assert!(y.max_abs() < 1e-13, "{}", y.max_abs());
    }

    #[test]
    fn slot_order_round_trip() {
        let m = Ctfno::<f64>::init(cfg(), 1).unwrap();
        let mut tape = Tape::new();
        let slots = ParamSlots::record(&mut tape, m.params(), true);
        let again = ParamSlots::from_canonical(&slots.canonical());
        assert_eq!(again.canonical(), slots.canonical());
        assert_eq!(slots.canonical().len(), m.params().to_values().len());
    }
}
