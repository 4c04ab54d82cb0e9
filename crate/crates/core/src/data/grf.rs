use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::spectral::{half_len, irfft_rows};

/// Periodic Gaussian random field `N(0, sigma^2 (-Laplacian + tau^2)^(-alpha))` on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfSpec {
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
}

impl GrfSpec {
    pub fn new(sigma: f64, tau: f64, alpha: f64) -> Result<Self> {
        let spec = Self { sigma, tau, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.tau > 0.0 && self.alpha > 0.5) {
            return Err(Error::config(format!(
                "GRF needs sigma > 0, tau > 0, alpha > 1/2; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Variance of the Fourier coefficient at wavenumber `k`.
    pub fn mode_variance(&self, k: usize) -> f64 {
        let w = std::f64::consts::TAU * k as f64;
        self.sigma * self.sigma * (w * w + self.tau * self.tau).powf(-self.alpha)
    }
}

/// Draws one sample on `n` uniform points `x_j = j/n`.
///
/// The field is `u(x) = sum_k c_k exp(2 pi i k x)` over `|k| <= n/2` with
/// `E|c_k|^2 = mode_variance(k)`, `c_{-k} = conj(c_k)`, and real `c_0` and
/// `c_{n/2}`. Draw order: `c_0`, then `(re, im)` of `c_1..c_{n/2-1}`, then `c_{n/2}`.
pub fn sample_grf(spec: &GrfSpec, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidLength(n));
    }
    let nf = half_len(n);
    let scale = n as f64;
    let mut coeffs = vec![Complex::new(0.0, 0.0); nf];
    coeffs[0] = Complex::new(spec.mode_variance(0).sqrt() * rng.normal() * scale, 0.0);
    for (k, c) in coeffs.iter_mut().enumerate().take(nf - 1).skip(1) {
        let sd = (spec.mode_variance(k) / 2.0).sqrt() * scale;
        let re = rng.normal() * sd;
        let im = rng.normal() * sd;
        *c = Complex::new(re, im);
    }
    coeffs[nf - 1] = Complex::new(spec.mode_variance(n / 2).sqrt() * rng.normal() * scale, 0.0);
    let mut out = vec![0.0; n];
    irfft_rows(&coeffs, n, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rfft_rows;

    fn heat_spec() -> GrfSpec {
        GrfSpec::new(20.0, 3.5, 2.5).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GrfSpec::new(1.0, 1.0, 0.5).is_err());
        assert!(GrfSpec::new(0.0, 1.0, 2.0).is_err());
        let mut r = RngStream::new(0, 0);
        assert!(sample_grf(&heat_spec(), 7, &mut r).is_err());
    }

    #[test]
    fn deterministic_per_stream() {
        let s = heat_spec();
        let a = sample_grf(&s, 64, &mut RngStream::new(5, 2)).unwrap();
        let b = sample_grf(&s, 64, &mut RngStream::new(5, 2)).unwrap();
        let c = sample_grf(&s, 64, &mut RngStream::new(5, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn coefficients_round_trip() {
        // The forward transform of a sample recovers real c_0 and c_{n/2}.
        let n = 32;
        let u = sample_grf(&heat_spec(), n, &mut RngStream::new(1, 0)).unwrap();
        let mut spec = vec![Complex::new(0.0, 0.0); half_len(n)];
        rfft_rows(&u, n, &mut spec).unwrap();
        assert!(spec[0].im.abs() < 1e-12);
        assert!(spec[n / 2].im.abs() < 1e-12);
    }
}
