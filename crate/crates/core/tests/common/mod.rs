//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ctfno::{Activation, Complex, CtfnoConfig, CtfnoParams};

/// Half-spectrum DFT by direct summation: `X_k = sum_j x_j exp(-2 pi i j k / n)`, `k = 0..=n/2`.
pub fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (j, &v)| {
                let th = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                acc + Complex::new(th.cos(), th.sin()) * v
            })
        })
        .collect()
}

/// Real signal from the first `spec.len()` modes of a Hermitian spectrum of length `n`.
///
/// Interior modes count twice; the imaginary parts of the mean and Nyquist modes are ignored.
pub fn naive_idft(spec: &[Complex<f64>], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            spec.iter().enumerate().map(|(k, z)| {
                let w = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
                let th = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                w * (z * Complex::new(th.cos(), th.sin())).re
            }).sum::<f64>() / n as f64
        })
        .collect()
}

/// Plain Fourier neural operator on one channels-last input `[n][d_a]`:
/// `v <- sigma(W v + b + K v)` per layer, lifted by `P` and projected by `Q`,
/// with `K v` the inverse DFT of `R(xi) v_hat(xi)` over modes `xi < k_max`.
pub fn vanilla_fno(cfg: &CtfnoConfig, p: &CtfnoParams<f64>, a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let (dv, k) = (cfg.width, cfg.modes);
    let matvec = |m: &[f64], cols: usize, x: &[f64]| -> Vec<f64> {
        m.chunks_exact(cols).map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum()).collect()
    };
    let mut v: Vec<Vec<f64>> = a.iter().map(|x| matvec(p.lift.data(), cfg.in_channels, x)).collect();
    for layer in &p.layers {
        let spectra: Vec<Vec<Complex<f64>>> = (0..dv)
            .map(|c| {
                let col: Vec<f64> = v.iter().map(|x| x[c]).collect();
                naive_dft(&col)[..k].to_vec()
            })
            .collect();
        let r = layer.kernel.data();
        let mut spectral = vec![vec![0.0; dv]; n];
        for o in 0..dv {
            let mixed: Vec<Complex<f64>> = (0..k)
                .map(|m| (0..dv).map(|i| r[m * dv * dv + o * dv + i] * spectra[i][m]).sum())
                .collect();
            for (x, val) in naive_idft(&mixed, n).into_iter().enumerate() {
                spectral[x][o] = val;
            }
        }
        v = v
            .iter()
            .zip(&spectral)
            .map(|(x, sp)| {
                let local = matvec(layer.weight.data(), dv, x);
                (0..dv).map(|o| cfg.activation.apply(local[o] + layer.bias.data()[o] + sp[o])).collect()
            })
            .collect();
    }
    v.iter().map(|x| matvec(p.proj.data(), dv, x)).collect()
}

pub fn small_config(layers: usize, modes: usize, width: usize, activation: Activation) -> CtfnoConfig {
    CtfnoConfig {
        layers,
        modes,
        width,
        in_channels: 1,
        out_channels: 1,
        time_hidden: 4,
        time_sinusoid: 3,
        heads: 1,
        padding: 0,
        stabilization: None,
        activation,
    }
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn rel_max_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(floor, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
