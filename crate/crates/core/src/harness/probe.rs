//! Empirical perturbation amplification against the layer-wise stability bounds.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::data::{RngStream, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::model::{spectral_norm, spectral_norm_complex, Ctfno};
use crate::scalar::Real;
use crate::spectral::Tensor;
use crate::train::{predict, Sample};

/// Stream index of probe perturbations.
pub const PROBE_STREAM: u64 = 0x3000_0000;

const POWER_ITERS: usize = 500;

/// Norms of one layer's effective operators at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorms {
    /// Largest row `L1` norm of `W diag(s)`.
    pub weight_row_l1: f64,
    /// Largest row `L1` norm of `phi_l(xi) R(xi)` over retained modes.
    pub kernel_row_l1: f64,
    /// `||W diag(s)||_2`.
    pub weight_norm: f64,
    /// `max_xi ||phi_l(xi) R(xi)||_2`.
    pub kernel_norm: f64,
}

impl LayerNorms {
    /// `M_l`, the larger of the two row-norm bounds.
    pub fn row_bound(&self) -> f64 {
        self.weight_row_l1.max(self.kernel_row_l1)
    }

    /// `sqrt(2) Lip M_l`.
    pub fn gershgorin_bound(&self, lip: f64) -> f64 {
        std::f64::consts::SQRT_2 * lip * self.row_bound()
    }

    /// `Lip (||W(t)||_2 + max_xi ||R(t, xi)||_2)`, a rigorous Lipschitz bound of the layer.
    pub fn operator_bound(&self, lip: f64) -> f64 {
        lip * (self.weight_norm + self.kernel_norm)
    }
}

/// Effective operator norms of every layer at time `t`.
pub fn layer_norms<T: Real>(model: &Ctfno<T>, t: T) -> Result<Vec<LayerNorms>> {
    let cfg = model.config();
    let (dv, k, dk) = (cfg.width, cfg.modes, cfg.head_width());
    let factors = model.layer_time_factors(t)?;
    let mut out = Vec::with_capacity(cfg.layers);
    for (layer, (s, phi)) in model.params().layers.iter().zip(&factors) {
        let w = Tensor::from_fn(&[dv, dv], |idx| {
            (layer.weight.data()[idx] * s.data()[idx % dv]).to_f64_lossy()
        });
        let weight_row_l1 = row_l1(w.data(), dv);
        let weight_norm = spectral_norm(&w, POWER_ITERS);
        let mut kernel_row_l1 = 0.0f64;
        let mut kernel_norm = 0.0f64;
        for m in 0..k {
            let block: Vec<Complex<f64>> = (0..dv * dv)
                .map(|idx| {
                    let o = idx / dv;
                    let f = phi.data()[(o / dk) * k + m];
                    let r = layer.kernel.data()[m * dv * dv + idx];
                    let z = f * r;
                    Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
                })
                .collect();
            for row in block.chunks_exact(dv) {
                kernel_row_l1 = kernel_row_l1.max(row.iter().map(|z| z.norm()).sum());
            }
            kernel_norm = kernel_norm.max(spectral_norm_complex(&block, dv, dv, POWER_ITERS));
        }
        out.push(LayerNorms { weight_row_l1, kernel_row_l1, weight_norm, kernel_norm });
    }
    Ok(out)
}

fn row_l1(m: &[f64], cols: usize) -> f64 {
    m.chunks_exact(cols).map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Whole-network bounds at time `t`: `(gershgorin, operator)`, each including `||Q||_2 ||P||_2`.
pub fn network_bounds<T: Real>(model: &Ctfno<T>, t: T) -> Result<(f64, f64)> {
    let lip = model.config().activation.lipschitz();
    let p = model.params();
    let outer = spectral_norm(&p.lift, POWER_ITERS) * spectral_norm(&p.proj, POWER_ITERS);
    let layers = layer_norms(model, t)?;
    let g = layers.iter().map(|l| l.gershgorin_bound(lip)).product::<f64>();
    let o = layers.iter().map(|l| l.operator_bound(lip)).product::<f64>();
    Ok((outer * g, outer * o))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub epsilon: f64,
    pub trials: usize,
    /// Largest `||N(a + d)(t) - N(a)(t)|| / ||d||` over trials and sample times.
    pub max_ratio: f64,
    /// Mean over trials of the per-trial maximum over sample times.
    pub mean_ratio: f64,
    /// `max_t ||Q|| ||P|| prod_l sqrt(2) Lip M_l(t)`.
    pub gershgorin_bound: f64,
    /// `max_t ||Q|| ||P|| prod_l Lip (||W_l(t)|| + max ||R_l(t)||)`.
    pub operator_bound: f64,
}

/// Gaussian perturbation of the given shape scaled to Euclidean norm `eps`.
pub fn gaussian_perturbation(shape: &[usize], eps: f64, rng: &mut RngStream) -> Tensor<f64> {
    loop {
        let d = Tensor::from_fn(shape, |_| rng.normal());
        let n = d.norm_l2();
        if n > 0.0 {
            return d.scale(eps / n);
        }
    }
}

/// Perturbs initial states of `indices` (cycled) and measures output amplification.
pub fn probe_network(
    model: &Ctfno<f64>,
    ds: &TrajectoryDataset,
    indices: &[usize],
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
    }
    if indices.is_empty() {
        return Err(Error::config("probe needs at least one trajectory"));
    }
    let mut rng = RngStream::new(seed, PROBE_STREAM);
    let times = ds.times.clone();
    let (n, ch) = (ds.grid(), ds.channels());
    let mut max_ratio = 0.0f64;
    let mut sum = 0.0;
    for trial in 0..trials {
        let s = Sample::<f64>::from_dataset(ds, indices[trial % indices.len()])?;
        let base = predict(model, &s.initial, &times)?;
        let delta = gaussian_perturbation(&[1, ch, n], epsilon, &mut rng);
        let moved = predict(model, &s.initial.add(&delta)?, &times)?;
        let block = base.len() / times.len().max(1);
        let worst = base
            .data()
            .chunks_exact(block)
            .zip(moved.data().chunks_exact(block))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / epsilon)
            .fold(0.0, f64::max);
        max_ratio = max_ratio.max(worst);
        sum += worst;
    }
    let mut gershgorin_bound = 0.0f64;
    let mut operator_bound = 0.0f64;
    for &t in &times {
        let (g, o) = network_bounds(model, t)?;
        gershgorin_bound = gershgorin_bound.max(g);
        operator_bound = operator_bound.max(o);
    }
    Ok(ProbeReport {
        epsilon,
        trials,
        max_ratio,
        mean_ratio: if trials == 0 { 0.0 } else { sum / trials as f64 },
        gershgorin_bound,
        operator_bound,
    })
}

/// Largest single-layer amplification over `trials` perturbations of `v: [1, grid, d_v]` at time `t`.
pub fn probe_layer(
    model: &Ctfno<f64>,
    layer: usize,
    v: &Tensor<f64>,
    t: f64,
    epsilon: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let base = model.layer_forward(v, t, layer)?;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = gaussian_perturbation(v.shape(), epsilon, rng);
        let moved = model.layer_forward(&v.add(&d)?, t, layer)?;
        worst = worst.max(moved.sub(&base)?.norm_l2() / epsilon);
    }
    Ok(worst)
}
