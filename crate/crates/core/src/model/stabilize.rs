use num_complex::Complex;

use super::params::CtfnoParams;
use crate::scalar::Real;
use crate::spectral::{Spectrum, Tensor};

/// Scales `row` so that `norm(row) <= bound`; rows already inside are untouched.
///
/// After the exact rescale a rounding excess is shaved off by repeated
/// `1 - 4 eps` factors, so the result is feasible and a second call is a no-op.
fn project_row<T: Real, X: Copy>(row: &mut [X], bound: T, norm: impl Fn(&[X]) -> T, scale: impl Fn(X, T) -> X) {
    let n = norm(row);
    if n <= bound {
        return;
    }
    let f = bound / n;
    for x in row.iter_mut() {
        *x = scale(*x, f);
    }
    let shave = T::one() - T::lit(4.0) * T::epsilon();
    while norm(row) > bound {
        for x in row.iter_mut() {
            *x = scale(*x, shave);
        }
    }
}

fn real_l1<T: Real>(row: &[T]) -> T {
    row.iter().map(|x| x.abs()).sum()
}

fn complex_l1<T: Real>(row: &[Complex<T>]) -> T {
    row.iter().map(|z| z.norm()).sum()
}

/// Largest row `L1` norm of a row-major `[rows, cols]` matrix.
pub fn max_row_l1<T: Real>(m: &Tensor<T>) -> T {
    m.data().chunks_exact(m.last_dim()).map(real_l1).fold(T::zero(), T::max)
}

/// Largest row `L1` norm (sum of moduli) over all per-mode matrices of `[k, out, in]`.
pub fn max_kernel_row_l1<T: Real>(r: &Spectrum<T>) -> T {
    r.data().chunks_exact(r.last_dim()).map(complex_l1).fold(T::zero(), T::max)
}

pub fn normalize_matrix_rows<T: Real>(m: &mut Tensor<T>, bound: T) {
    let cols = m.last_dim();
    for row in m.data_mut().chunks_exact_mut(cols) {
        project_row(row, bound, real_l1, |x, f| x * f);
    }
}

pub fn normalize_kernel_rows<T: Real>(r: &mut Spectrum<T>, bound: T) {
    let cols = r.last_dim();
    for row in r.data_mut().chunks_exact_mut(cols) {
        project_row(row, bound, complex_l1, |z, f| z * f);
    }
}

/// Projects every row of every `W_l` and every per-mode `R_l(xi)` onto the
/// `L1` ball of radius `bound`. Idempotent; feasible rows are left bit-identical.
pub fn gershgorin_normalize<T: Real>(params: &mut CtfnoParams<T>, bound: T) {
    for l in &mut params.layers {
        normalize_matrix_rows(&mut l.weight, bound);
        normalize_kernel_rows(&mut l.kernel, bound);
    }
}

/// Whether every constrained row satisfies the bound.
pub fn is_feasible<T: Real>(params: &CtfnoParams<T>, bound: T) -> bool {
    params
        .layers
        .iter()
        .all(|l| max_row_l1(&l.weight) <= bound && max_kernel_row_l1(&l.kernel) <= bound)
}

/// Spectral norm of a complex `[rows, cols]` matrix by power iteration on `M^H M`.
pub fn spectral_norm_complex(m: &[Complex<f64>], rows: usize, cols: usize, iters: usize) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment
    let mut x: Vec<Complex<f64>> =
        (0..cols).map(|j| Complex::new(1.0 + 0.37 * j as f64, 0.11 * (j as f64 + 1.0).sqrt())).collect();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|z| *z /= nx);
        let y: Vec<Complex<f64>> =
            (0..rows).map(|i| (0..cols).map(|j| m[i * cols + j] * x[j]).sum()).collect();
        sigma = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x = (0..cols).map(|j| (0..rows).map(|i| m[i * cols + j].conj() * y[i]).sum()).collect();
    }
    sigma
}

/// Spectral norm of a real row-major matrix by power iteration on `M^T M`.
pub fn spectral_norm<T: Real>(m: &Tensor<T>, iters: usize) -> f64 {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    let z: Vec<Complex<f64>> = m.data().iter().map(|v| Complex::new(v.to_f64_lossy(), 0.0)).collect();
    spectral_norm_complex(&z, rows, cols, iters)
}

/// `max_xi ||R(xi)||_2` over the per-mode matrices of a `[k, out, in]` kernel.
pub fn kernel_spectral_norm<T: Real>(r: &Spectrum<T>, iters: usize) -> f64 {
    let (k, rows, cols) = (r.shape()[0], r.shape()[1], r.shape()[2]);
    (0..k)
        .map(|m| {
            let block: Vec<Complex<f64>> = r.data()[m * rows * cols..(m + 1) * rows * cols]
                .iter()
                .map(|z| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()))
                .collect();
            spectral_norm_complex(&block, rows, cols, iters)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RngStream;

    #[test]
    fn identity_is_feasible() {
        let mut m = Tensor::new(vec![2, 2], vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        let before = m.clone();
        normalize_matrix_rows(&mut m, 2.0);
        assert_eq!(m, before);
    }

    #[test]
    fn scales_heavy_row() {
        let mut m = Tensor::new(vec![1, 2], vec![3.0f64, 1.0]).unwrap();
        normalize_matrix_rows(&mut m, 2.0);
        assert_eq!(m.data(), &[1.5, 0.5]);
    }

    #[test]
    fn complex_row_uses_moduli() {
        let mut r = Spectrum::new(vec![1, 1, 2], vec![Complex::new(0.0f64, 3.0), Complex::new(4.0, 0.0)]).unwrap();
        normalize_kernel_rows(&mut r, 2.5);
        let f = 2.5 / 7.0;
        assert!((r.data()[0].im - 3.0 * f).abs() < 1e-15);
        assert!((r.data()[1].re - 4.0 * f).abs() < 1e-15);
        assert!(complex_l1(r.data()) <= 2.5);
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..50 {
            let mut m = Tensor::from_fn(&[7, 7], |_| rng.uniform_in(-3.0, 3.0));
            let bound = rng.uniform_in(0.1, 2.0);
            normalize_matrix_rows(&mut m, bound);
            assert!(max_row_l1(&m) <= bound);
            let once = m.clone();
            normalize_matrix_rows(&mut m, bound);
            assert_eq!(once, m);
        }
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let m = Tensor::new(vec![3, 3], vec![2.0f64, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((spectral_norm(&m, 200) - 5.0).abs() < 1e-10);
    }
}
