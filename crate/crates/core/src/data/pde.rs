use std::f64::consts::TAU;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::spectral::{half_len, irfft_rows, rfft_rows};

fn forward(u: &[f64]) -> Result<Vec<Complex<f64>>> {
    let mut spec = vec![Complex::new(0.0, 0.0); half_len(u.len())];
    rfft_rows(u, u.len(), &mut spec)?;
    Ok(spec)
}

fn inverse(spec: &[Complex<f64>], n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    irfft_rows(spec, n, &mut out)?;
    Ok(out)
}

/// `exp(-nu (2 pi k)^2 t)` for `k = 0..=n/2`.
fn diffusion_factors(n: usize, nu: f64, t: f64) -> Vec<f64> {
    (0..half_len(n)).map(|k| (-nu * (TAU * k as f64).powi(2) * t).exp()).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Domain("times must be finite and non-negative".into()));
    }
    Ok(())
}

/// Exact periodic heat solution on `[0, 1)`, row-major `[times.len(), n]`.
pub fn solve_heat(u0: &[f64], nu: f64, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    let n = u0.len();
    let spec0 = forward(u0)?;
    let mut out = Vec::with_capacity(times.len() * n);
    for &t in times {
        let damp = diffusion_factors(n, nu, t);
        let spec: Vec<Complex<f64>> = spec0.iter().zip(&damp).map(|(z, d)| z * d).collect();
        out.extend(inverse(&spec, n)?);
    }
    Ok(out)
}

/// Observer hook called after every micro-step with `(step, time, state)`.
pub type BurgersObserver<'a> = dyn FnMut(usize, f64, &[f64]) + 'a;

/// Viscous Burgers `u_t + u u_x = nu u_xx` on the periodic unit interval.
///
/// Each micro-step of length `dt` applies the exact diffusion factor in
/// Fourier space, then one forward-Euler step of `-u u_x`. The product is
/// formed in physical space from `u` truncated to `|k| < n/3`, and the
/// product is truncated the same way (2/3 rule). Every gap between
/// consecutive sample times (starting from 0) must be an integer multiple of `dt`.
pub fn solve_burgers(u0: &[f64], nu: f64, dt: f64, times: &[f64]) -> Result<Vec<f64>> {
    burgers_impl(u0, nu, dt, times, None)
}

pub fn solve_burgers_observed(
    u0: &[f64],
    nu: f64,
    dt: f64,
    times: &[f64],
    observer: &mut BurgersObserver<'_>,
) -> Result<Vec<f64>> {
    burgers_impl(u0, nu, dt, times, Some(observer))
}

fn burgers_impl(
    u0: &[f64],
    nu: f64,
    dt: f64,
    times: &[f64],
    mut observer: Option<&mut BurgersObserver<'_>>,
) -> Result<Vec<f64>> {
    check_times(times)?;
    if !(dt > 0.0) {
        return Err(Error::config(format!("solver step must be positive, got {dt}")));
    }
    let n = u0.len();
    let nf = half_len(n);
    let cutoff = n / 3;
    let damp = diffusion_factors(n, nu, dt);
    let mut spec = forward(u0)?;
    let mut out = Vec::with_capacity(times.len() * n);
    let mut t = 0.0;
    let mut step = 0usize;
    let mut trunc = vec![Complex::new(0.0, 0.0); nf];
    let mut deriv = vec![Complex::new(0.0, 0.0); nf];
    for &target in times {
        let gap = target - t;
        let steps = (gap / dt).round();
        if steps < 0.0 || (steps * dt - gap).abs() > 1e-9 * dt.max(target) {
            return Err(Error::config(format!(
                "sample gap {gap} from t = {t} is not a multiple of solver step {dt}"
            )));
        }
        for _ in 0..steps as usize {
            for (z, d) in spec.iter_mut().zip(&damp) {
                *z *= d;
            }
            for k in 0..nf {
                let keep = if k < cutoff { spec[k] } else { Complex::new(0.0, 0.0) };
                trunc[k] = keep;
                deriv[k] = keep * Complex::new(0.0, TAU * k as f64);
            }
            let u = inverse(&trunc, n)?;
            let ux = inverse(&deriv, n)?;
            let prod: Vec<f64> = u.iter().zip(&ux).map(|(a, b)| a * b).collect();
            let pspec = forward(&prod)?;
            for k in 0..cutoff.min(nf) {
                spec[k] -= pspec[k] * dt;
            }
            step += 1;
            let now = t + (step as f64) * dt;
            if spec.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::BlowUp { step, time: now });
            }
            if let Some(obs) = observer.as_mut() {
                obs(step, now, &inverse(&spec, n)?);
            }
        }
        t = target;
        out.extend(inverse(&spec, n)?);
    }
    Ok(out)
}

/// Logistic closed form `f e^(rho t) / (f e^(rho t) + 1 - f)`, row-major `[times.len(), n]`.
pub fn solve_reaction(f: &[f64], rho: f64, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    let mut out = Vec::with_capacity(times.len() * f.len());
    for &t in times {
        let g = (rho * t).exp();
        for &fx in f {
            let num = fx * g;
            let den = num + 1.0 - fx;
            if !(den > 0.0) {
                return Err(Error::Domain(format!("reaction denominator {den} at f = {fx}, t = {t}")));
            }
            out.push(num / den);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    #[test]
    fn heat_constant_fixed_point() {
        let u = solve_heat(&[1.5; 16], 0.01, &[0.0, 1.0, 10.0]).unwrap();
        assert!(u.iter().all(|v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn heat_single_mode() {
        let x = grid(64);
        let u0: Vec<f64> = x.iter().map(|x| (TAU * x).sin()).collect();
        let u = solve_heat(&u0, 0.001, &[0.05]).unwrap();
        let f = (-0.001 * TAU * TAU * 0.05f64).exp();
        for (a, b) in u.iter().zip(&u0) {
            assert!((a - f * b).abs() < 1e-13);
        }
    }

    #[test]
    fn burgers_conserves_mean() {
        let x = grid(64);
        let u0: Vec<f64> = x.iter().map(|x| 0.3 + (TAU * x).sin() + 0.5 * (2.0 * TAU * x).cos()).collect();
        let mut worst: f64 = 0.0;
        let mean0: f64 = u0.iter().sum::<f64>() / 64.0;
        solve_burgers_observed(&u0, 0.01, 1e-3, &[0.2], &mut |_, _, s| {
            let m = s.iter().sum::<f64>() / 64.0;
            worst = worst.max((m - mean0).abs());
        })
        .unwrap();
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn burgers_rejects_misaligned_times() {
        let u0 = vec![0.0; 16];
        assert!(solve_burgers(&u0, 0.01, 0.3, &[1.0]).is_err());
        assert!(solve_burgers(&u0, 0.01, 0.25, &[1.0]).is_ok());
    }

    #[test]
    fn burgers_blow_up_is_reported() {
        let x = grid(32);
        let u0: Vec<f64> = x.iter().map(|x| 1e3 * (TAU * x).sin()).collect();
        let r = solve_burgers(&u0, 0.0, 0.1, &[10.0]);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn reaction_closed_form() {
        let u = solve_reaction(&[0.5, 1.0, 0.0], 6.0, &[0.0, 0.5]).unwrap();
        assert_eq!(&u[..3], &[0.5, 1.0, 0.0]);
        assert!((u[3] - 0.952_574_126_822_433_4).abs() < 1e-15);
        assert_eq!(u[4], 1.0);
        assert_eq!(u[5], 0.0);
        assert!(solve_reaction(&[-0.5], 6.0, &[1.0]).is_err());
    }
}
