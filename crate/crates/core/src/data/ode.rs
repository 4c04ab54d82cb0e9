use std::f64::consts::TAU;

use crate::error::{Error, Result};

type State = [f64; 2];

fn check_increasing(times: &[f64], t0: f64) -> Result<()> {
    let mut prev = t0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::Domain(format!("sample times must be non-decreasing from {t0}, got {t} after {prev}")));
        }
        prev = t;
    }
    Ok(())
}

/// Damped rotation `u' = A tanh(u)` with `A = [[-1/8, 1], [-1, -1/8]]`.
pub fn spiral_rhs(u: State) -> State {
    let (a, b) = (u[0].tanh(), u[1].tanh());
    [-a / 8.0 + b, -a - b / 8.0]
}

fn rk4_step(u: State, h: f64) -> State {
    let add = |u: State, k: State, s: f64| [u[0] + s * k[0], u[1] + s * k[1]];
    let k1 = spiral_rhs(u);
    let k2 = spiral_rhs(add(u, k1, h / 2.0));
    let k3 = spiral_rhs(add(u, k2, h / 2.0));
    let k4 = spiral_rhs(add(u, k3, h));
    [
        u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Spiral trajectory from `u(0) = u0`, `[times.len(), 2]`.
pub fn gen_spiral(u0: State, times: &[f64]) -> Result<Vec<f64>> {
    gen_spiral_with_step(u0, times, 0.01)
}

/// Classic RK4 with a uniform step of at most `max_step` inside each sample gap.
pub fn gen_spiral_with_step(u0: State, times: &[f64], max_step: f64) -> Result<Vec<f64>> {
    check_increasing(times, 0.0)?;
    let mut u = u0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(2 * times.len());
    for &target in times {
        let gap = target - t;
        if gap > 0.0 {
            let steps = (gap / max_step).ceil().max(1.0) as usize;
            let h = gap / steps as f64;
            for _ in 0..steps {
                u = rk4_step(u, h);
            }
        }
        t = target;
        out.extend_from_slice(&u);
    }
    Ok(out)
}

/// Lyapunov function `sum log cosh(u_i)` of the spiral.
pub fn spiral_lyapunov(u: &[f64]) -> f64 {
    u.iter().map(|&x| {
        let a = x.abs();
        // log cosh without overflow
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    })
    .sum()
}

/// Settings of the adaptive implicit trapezoidal integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffOptions {
    pub mu: f64,
    /// Local error tolerance per unit time, relative to `1 + |z| + |f(z)|`.
    pub tol: f64,
    pub min_step: f64,
    pub max_newton: usize,
}

impl Default for StiffOptions {
    fn default() -> Self {
        Self { mu: 1000.0, tol: 1e-8, min_step: 1e-12, max_newton: 50 }
    }
}

fn vdp_rhs(mu: f64, z: State) -> State {
    [z[1], mu * (1.0 - z[0] * z[0]) * z[1] - z[0]]
}

fn vdp_jac(mu: f64, z: State) -> [[f64; 2]; 2] {
    [[0.0, 1.0], [-2.0 * mu * z[0] * z[1] - 1.0, mu * (1.0 - z[0] * z[0])]]
}

/// One trapezoidal step `z = y + h/2 (f(y) + f(z))` solved by Newton's method.
fn trapezoid_step(opts: &StiffOptions, y: State, h: f64) -> Option<State> {
    let fy = vdp_rhs(opts.mu, y);
    // explicit Euler predictor
    let mut z = [y[0] + h * fy[0], y[1] + h * fy[1]];
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_newton {
        let fz = vdp_rhs(opts.mu, z);
        let g = [
            z[0] - y[0] - 0.5 * h * (fy[0] + fz[0]),
            z[1] - y[1] - 0.5 * h * (fy[1] + fz[1]),
        ];
        let j = vdp_jac(opts.mu, z);
        let a = [[1.0 - 0.5 * h * j[0][0], -0.5 * h * j[0][1]], [-0.5 * h * j[1][0], 1.0 - 0.5 * h * j[1][1]]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (g[0] * a[1][1] - g[1] * a[0][1]) / det;
        let dy = (a[0][0] * g[1] - a[1][0] * g[0]) / det;
        z = [z[0] - dx, z[1] - dy];
        if !(z[0].is_finite() && z[1].is_finite()) {
            return None;
        }
        let scale = 1.0 + z[0].abs().max(z[1].abs());
        last = dx.abs().max(dy.abs()) / scale;
        if last <= 4.0 * f64::EPSILON {
            return Some(z);
        }
    }
    // corrections that stagnate at rounding level still count as converged
    (last <= 1e-12).then_some(z)
}

/// Stiff Van der Pol `x' = y, y' = mu (1 - x^2) y - x` from `(x0, 0)`, `[times.len(), 2]`.
pub fn gen_stiff_vdp(x0: f64, times: &[f64]) -> Result<Vec<f64>> {
    gen_stiff_vdp_with(&StiffOptions::default(), [x0, 0.0], times)
}

/// Adaptive implicit trapezoidal integration with step-doubling error control.
///
/// A step of size `h` is compared with two steps of `h/2`; the local error
/// estimate is their difference over 3 (second order). A step is accepted
/// when the estimate per unit time, relative to `1 + |z| + |f(z)|` (max
/// norms), is below `tol`: smooth phases accumulate at most about
/// `tol x horizon`, while fast transients are measured against their own
/// rate of change. Accepted steps keep the
/// two-half-step result. Newton failure halves the step; falling below
/// `min_step` is a stiff failure.
pub fn gen_stiff_vdp_with(opts: &StiffOptions, z0: State, times: &[f64]) -> Result<Vec<f64>> {
    check_increasing(times, 0.0)?;
    let mut z = z0;
    let mut t = 0.0;
    let mut h = 1e-4f64;
    let mut out = Vec::with_capacity(2 * times.len());
    for &target in times {
        while t < target {
            let step = h.min(target - t);
            let last = step == target - t;
            let full = trapezoid_step(opts, z, step);
            let half = trapezoid_step(opts, z, step / 2.0).and_then(|m| trapezoid_step(opts, m, step / 2.0));
            let (full, half) = match (full, half) {
                (Some(f), Some(hf)) => (f, hf),
                _ => {
                    h = step / 2.0;
                    if h < opts.min_step {
                        return Err(Error::StiffFailure { time: t, reason: "Newton iteration did not converge".into() });
                    }
                    continue;
                }
            };
            let f = vdp_rhs(opts.mu, half);
            let weight = 1.0 + half[0].abs().max(half[1].abs()) + f[0].abs().max(f[1].abs());
            let noise = 16.0 * f64::EPSILON * (1.0 + half[0].abs().max(half[1].abs()));
            let diff = (half[0] - full[0]).abs().max((half[1] - full[1]).abs());
            let err = ((diff - noise).max(0.0) / 3.0) / (weight * step);
            if err <= opts.tol {
                z = half;
                t = if last { target } else { t + step };
                let grow = if err == 0.0 { 2.0 } else { (0.9 * (opts.tol / err).sqrt()).clamp(0.2, 2.0) };
                // a step truncated to hit a sample time does not shrink the controller's step
                h = if last { h.max(step * grow) } else { step * grow };
            } else {
                h = step * (0.9 * (opts.tol / err).sqrt()).clamp(0.1, 0.9);
                if h < opts.min_step {
                    return Err(Error::StiffFailure { time: t, reason: format!("step fell below {}", opts.min_step) });
                }
            }
        }
        out.extend_from_slice(&z);
    }
    Ok(out)
}

/// `t/(2 pi) - floor(t/(2 pi))`
pub fn sawtooth(t: f64) -> f64 {
    t / TAU - (t / TAU).floor()
}

/// `2 (1 - floor(2 (t/(2 pi) - floor(t/(2 pi)))))`, which takes the values 2 and 0.
pub fn square(t: f64) -> f64 {
    2.0 * (1.0 - (2.0 * (t / TAU - (t / TAU).floor())).floor())
}

/// Sawtooth samples at `t0 + offset`, `[offsets.len(), 1]`.
pub fn gen_sawtooth(t0: f64, offsets: &[f64]) -> Vec<f64> {
    offsets.iter().map(|&s| sawtooth(t0 + s)).collect()
}

/// Square-wave samples at `t0 + offset`, `[offsets.len(), 1]`.
pub fn gen_square(t0: f64, offsets: &[f64]) -> Vec<f64> {
    offsets.iter().map(|&s| square(t0 + s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spiral_equilibrium() {
        let u = gen_spiral([0.0, 0.0], &[1.0, 5.0]).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spiral_refinement() {
        let a = gen_spiral_with_step([2.0, 0.0], &[10.0], 0.01).unwrap();
        let b = gen_spiral_with_step([2.0, 0.0], &[10.0], 0.005).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
    }

    #[test]
    fn lyapunov_matches_log_cosh() {
        for x in [-3.0f64, -0.2, 0.0, 0.7, 5.0] {
            assert!((spiral_lyapunov(&[x]) - x.cosh().ln()).abs() < 1e-14);
        }
        assert!(spiral_lyapunov(&[800.0]).is_finite());
    }

    #[test]
    fn harmonic_limit() {
        let opts = StiffOptions { mu: 0.0, ..Default::default() };
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let z = gen_stiff_vdp_with(&opts, [1.5, 0.0], &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert!((z[2 * i] - 1.5 * t.cos()).abs() < 1e-6, "t = {t}: {}", z[2 * i]);
        }
    }

    #[test]
    fn stiff_stays_bounded() {
        let times: Vec<f64> = (1..=100).map(|i| i as f64 * 0.2).collect();
        let z = gen_stiff_vdp(2.0, &times).unwrap();
        assert!(z.chunks(2).all(|p| p[0].abs() <= 2.1 && p[0].is_finite()));
    }

    #[test]
    fn wave_formulas() {
        assert_eq!(sawtooth(0.0), 0.0);
        assert_eq!(sawtooth(PI), 0.5);
        assert_eq!(sawtooth(TAU), 0.0);
        assert_eq!(square(0.1), 2.0);
        assert_eq!(square(PI + 0.1), 0.0);
        assert_eq!(gen_square(0.1, &[0.0, PI]), vec![2.0, 0.0]);
    }
}
