//! Real-input discrete Fourier transforms along the last axis.
//!
//! Convention: the forward transform is unnormalized,
//! `X_k = sum_j x_j exp(-2 pi i j k / n)`, and only modes `0..=n/2` are kept.
//! The inverse divides by `n` and assumes Hermitian symmetry, so the
//! imaginary parts of mode 0 and (for even `n`) mode `n/2` are ignored.

use num_complex::Complex;

use super::tensor::{Spectrum, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of stored modes for a real signal of length `n`.
pub fn half_len(n: usize) -> usize {
    n / 2 + 1
}

/// Weight of mode `k` when reconstructing a length-`n` real signal from its
/// half spectrum: 1 for the mean and Nyquist modes, 2 otherwise.
pub fn mode_weight(k: usize, n: usize) -> usize {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        1
    } else {
        2
    }
}

/// Row-wise forward transform of a flat buffer of `input.len() / n` signals.
pub fn rfft_rows<T: Real>(input: &[T], n: usize, out: &mut [Complex<T>]) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidLength(n));
    }
    let nf = half_len(n);
    if input.len() % n != 0 || out.len() != input.len() / n * nf {
        return Err(Error::shape(format!("rfft rows: {} inputs, {} outputs, n = {}", input.len(), out.len(), n)));
    }
    let plan = T::r2c_plan(n);
    let mut buf = plan.make_input_vec();
    let mut scratch = plan.make_scratch_vec();
    for (row, dst) in input.chunks_exact(n).zip(out.chunks_exact_mut(nf)) {
        buf.copy_from_slice(row);
        plan.process_with_scratch(&mut buf, dst, &mut scratch)
            .map_err(|e| Error::shape(e.to_string()))?;
    }
    Ok(())
}

/// Row-wise inverse transform including the `1/n` factor.
pub fn irfft_rows<T: Real>(input: &[Complex<T>], n: usize, out: &mut [T]) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidLength(n));
    }
    let nf = half_len(n);
    if input.len() % nf != 0 || out.len() != input.len() / nf * n {
        return Err(Error::shape(format!("irfft rows: {} modes, {} outputs, n = {}", input.len(), out.len(), n)));
    }
    let plan = T::c2r_plan(n);
    let mut buf = plan.make_input_vec();
    let mut scratch = plan.make_scratch_vec();
    let inv_n = T::one() / T::lit(n as f64);
    for (row, dst) in input.chunks_exact(nf).zip(out.chunks_exact_mut(n)) {
        buf.copy_from_slice(row);
        buf[0].im = T::zero();
        if n % 2 == 0 {
            buf[nf - 1].im = T::zero();
        }
        plan.process_with_scratch(&mut buf, dst, &mut scratch)
            .map_err(|e| Error::shape(e.to_string()))?;
        for v in dst.iter_mut() {
            *v *= inv_n;
        }
    }
    Ok(())
}

/// Forward transform of every signal along the last axis.
pub fn dft_forward<T: Real>(signal: &Tensor<T>) -> Result<Spectrum<T>> {
    let n = signal.last_dim();
    if signal.rank() == 0 || n < 2 {
        return Err(Error::InvalidLength(if signal.rank() == 0 { 1 } else { n }));
    }
    let mut shape = signal.shape().to_vec();
    *shape.last_mut().unwrap() = half_len(n);
    let mut out = Spectrum::zeros(&shape);
    rfft_rows(signal.data(), n, out.data_mut())?;
    Ok(out)
}

/// Inverse of [`dft_forward`] for signals of length `n`.
pub fn dft_inverse<T: Real>(spec: &Spectrum<T>, n: usize) -> Result<Tensor<T>> {
    if n < 2 {
        return Err(Error::InvalidLength(n));
    }
    if spec.shape().is_empty() || spec.last_dim() != half_len(n) {
        return Err(Error::shape(format!(
            "spectrum last axis {} does not match n = {} (expected {})",
            spec.last_dim(),
            n,
            half_len(n)
        )));
    }
    let mut shape = spec.shape().to_vec();
    *shape.last_mut().unwrap() = n;
    let mut out = Tensor::zeros(&shape);
    irfft_rows(spec.data(), n, out.data_mut())?;
    Ok(out)
}

/// Re-grids a half spectrum from length `n_old` to `n_new`.
///
/// Coefficients are rescaled by `n_new / n_old` so the inverse transform on the
/// new grid samples the same trigonometric interpolant. Modes that become or
/// stop being the Nyquist mode are folded so that padding followed by
/// truncation is exact.
pub fn pad_or_truncate_spectrum<T: Real>(spec: &Spectrum<T>, n_old: usize, n_new: usize) -> Result<Spectrum<T>> {
    if n_new < 2 {
        return Err(Error::InvalidLength(n_new));
    }
    if spec.shape().is_empty() || spec.last_dim() != half_len(n_old) {
        return Err(Error::shape(format!("spectrum last axis {} does not match n = {}", spec.last_dim(), n_old)));
    }
    if n_old == n_new {
        return Ok(spec.clone());
    }
    let (nf_old, nf_new) = (half_len(n_old), half_len(n_new));
    let scale = T::lit(n_new as f64) / T::lit(n_old as f64);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut shape = spec.shape().to_vec();
    *shape.last_mut().unwrap() = nf_new;
    let mut out = Spectrum::zeros(&shape);
    for (src, dst) in spec.data().chunks_exact(nf_old).zip(out.data_mut().chunks_exact_mut(nf_new)) {
        for k in 0..nf_old.min(nf_new) {
            let mut z = src[k];
            let nyq_old = n_old % 2 == 0 && k == n_old / 2;
            let nyq_new = n_new % 2 == 0 && k == n_new / 2;
            if nyq_old && !nyq_new {
                z = Complex::new(z.re * half, T::zero());
            } else if nyq_new && !nyq_old {
                z = Complex::new(z.re * two, T::zero());
            }
            dst[k] = z * scale;
        }
    }
    Ok(out)
}

/// Spectral resampling of real signals along the last axis.
pub fn resample<T: Real>(signal: &Tensor<T>, n_new: usize) -> Result<Tensor<T>> {
    let n_old = signal.last_dim();
    if n_old == n_new {
        return Ok(signal.clone());
    }
    let spec = dft_forward(signal)?;
    dft_inverse(&pad_or_truncate_spectrum(&spec, n_old, n_new)?, n_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (j, &v)| {
                    let th = -2.0 * PI * (j * k % n) as f64 / n as f64;
                    acc + Complex::new(th.cos(), th.sin()) * v
                })
            })
            .collect()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn constant_and_nyquist_signals() {
        let c = dft_forward(&Tensor::from_vec(vec![1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(c.data(), &[Complex::new(4.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)]);
        let a = dft_forward(&Tensor::from_vec(vec![1.0, -1.0, 1.0, -1.0])).unwrap();
        assert!((a.data()[2] - Complex::new(4.0, 0.0)).norm() < 1e-15);
        assert!(a.data()[0].norm() < 1e-15 && a.data()[1].norm() < 1e-15);
    }

    #[test]
    fn matches_naive_dft_at_256() {
        let x = pseudo_random(256, 7);
        let fast = dft_forward(&Tensor::from_vec(x.clone())).unwrap();
        let slow = naive_dft(&x);
        let err = fast.data().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err}");
    }

    #[test]
    fn non_power_of_two_lengths() {
        for &n in &[6usize, 100, 97] {
            let x = pseudo_random(n, n as u64);
            let fast = dft_forward(&Tensor::from_vec(x.clone())).unwrap();
            let slow = naive_dft(&x);
            let err = fast.data().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n = {n}, err = {err}");
            let back = dft_inverse(&fast, n).unwrap();
            for (a, b) in back.data().iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_short_signals() {
        assert!(matches!(dft_forward(&Tensor::<f64>::from_vec(vec![1.0])), Err(Error::InvalidLength(1))));
        assert!(matches!(dft_forward(&Tensor::<f64>::from_vec(vec![])), Err(Error::InvalidLength(0))));
        let s = Spectrum::<f64>::zeros(&[3]);
        assert!(matches!(dft_inverse(&s, 6), Err(Error::Shape(_))));
    }

    #[test]
    fn inverse_of_single_modes() {
        let n = 16;
        let mut s = Spectrum::<f64>::zeros(&[half_len(n)]);
        s.data_mut()[0] = Complex::new(n as f64, 0.0);
        let ones = dft_inverse(&s, n).unwrap();
        assert!(ones.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let mut s = Spectrum::<f64>::zeros(&[half_len(n)]);
        s.data_mut()[1] = Complex::new(n as f64 / 2.0, 0.0);
        let c = dft_inverse(&s, n).unwrap();
        for (j, &v) in c.data().iter().enumerate() {
            assert!((v - (2.0 * PI * j as f64 / n as f64).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn batched_rows_are_independent() {
        let x = Tensor::new(vec![2, 3, 8], pseudo_random(48, 3)).unwrap();
        let s = dft_forward(&x).unwrap();
        assert_eq!(s.shape(), &[2, 3, 5]);
        let row = Tensor::from_vec(x.data()[8..16].to_vec());
        let srow = dft_forward(&row).unwrap();
        assert_eq!(&s.data()[5..10], srow.data());
    }

    #[test]
    fn resampling_cosine() {
        let f = |n: usize| Tensor::from_fn(&[n], |j| (2.0 * PI * j as f64 / n as f64).cos());
        let up = resample(&f(64), 128).unwrap();
        let err = up.sub(&f(128)).unwrap().max_abs();
        assert!(err < 1e-12, "err = {err}");
        let same = resample(&f(64), 64).unwrap();
        assert_eq!(same, f(64));
    }

    #[test]
    fn resample_round_trip_band_limited() {
        let g = |n: usize| {
            Tensor::from_fn(&[n], |j| {
                let x = j as f64 / n as f64;
                0.3 + (2.0 * PI * 3.0 * x).sin() - 0.5 * (2.0 * PI * 10.0 * x).cos() + 0.2 * (2.0 * PI * 17.0 * x).sin()
            })
        };
        let x = g(48);
        let there = resample(&x, 96).unwrap();
        assert!(there.sub(&g(96)).unwrap().max_abs() < 1e-12);
        let back = resample(&there, 48).unwrap();
        assert!(back.sub(&x).unwrap().max_abs() < 1e-12);
        // odd targets fold nothing and still agree
        let odd = resample(&x, 75).unwrap();
        assert!(odd.sub(&g(75)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn nyquist_folding_is_consistent() {
        // A mode that is Nyquist on the coarse grid survives a pad/truncate cycle.
        let n = 8;
        let x = Tensor::from_fn(&[n], |j| if j % 2 == 0 { 1.0 } else { -1.0 });
        let s = dft_forward(&x).unwrap();
        let up = pad_or_truncate_spectrum(&s, n, 16).unwrap();
        let down = pad_or_truncate_spectrum(&up, 16, n).unwrap();
        let back = dft_inverse(&down, n).unwrap();
        assert!(back.sub(&x).unwrap().max_abs() < 1e-14);
    }
}
