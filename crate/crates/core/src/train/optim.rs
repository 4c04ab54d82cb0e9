use serde::{Deserialize, Serialize};

use crate::autograd::Value;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Adamax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter moment estimates. For Adamax the second slot holds the
/// exponentially weighted infinity norm.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<T> {
    pub kind: OptimizerKind,
    pub settings: AdamSettings,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> OptimState<T> {
    pub fn new(kind: OptimizerKind, params: &[Value<T>]) -> Self {
        let zeros = |v: &Value<T>| vec![T::zero(); v.real_len()];
        Self {
            kind,
            settings: AdamSettings::default(),
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [Value<T>], grads: &[Value<T>], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::shape(format!(
                "optimizer holds {} arrays, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let s = self.settings;
        let (b1, b2, eps) = (T::lit(s.beta1), T::lit(s.beta2), T::lit(s.eps));
        let one = T::one();
        let t = self.step as i32;
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);
        let lr = T::lit(lr);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (p, g) = (p.flat_mut(), g.flat());
            if p.len() != g.len() || p.len() != self.first[i].len() {
                return Err(Error::shape(format!("optimizer: array {i} changed length")));
            }
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                match self.kind {
                    OptimizerKind::Adam => {
                        v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                        let mh = m[j] / c1;
                        let vh = v[j] / c2;
                        p[j] -= lr * mh / (vh.sqrt() + eps);
                    }
                    OptimizerKind::Adamax => {
                        v[j] = (b2 * v[j]).max(g[j].abs());
                        p[j] -= lr / c1 * m[j] / (v[j] + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Global `L2` norm of all gradient entries.
pub fn global_norm<T: Real>(grads: &[Value<T>]) -> T {
    grads.iter().flat_map(|g| g.flat().iter()).map(|&x| x * x).sum::<T>().sqrt()
}

/// Scales all gradients so their global norm is at most `threshold`; returns the pre-clip norm.
pub fn clip_gradients<T: Real>(grads: &mut [Value<T>], threshold: T) -> T {
    let norm = global_norm(grads);
    if norm > threshold {
        let f = threshold / norm;
        for g in grads.iter_mut() {
            g.flat_mut().iter_mut().for_each(|x| *x *= f);
        }
    }
    norm
}

/// `lr0 * decay^floor(epoch / interval)`.
pub fn scheduled_lr(lr0: f64, decay: f64, interval: usize, epoch: usize) -> f64 {
    lr0 * decay.powi((epoch / interval.max(1)) as i32)
}
