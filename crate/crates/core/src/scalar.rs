//! Scalar abstraction shared by the numerical core.
//!
//! Everything in [`crate::spectral`], [`crate::autograd`], [`crate::model`] and
//! [`crate::train`] is written against [`Real`], which is implemented for `f32`
//! and `f64`. Data generation and on-disk formats are fixed to `f64`.

use std::cell::RefCell;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::FftNum;

/// Floating-point type usable by the operator-learning core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn erf(self) -> Self;

    /// Cached real-to-complex plan for length `n`.
    fn r2c_plan(n: usize) -> Arc<dyn RealToComplex<Self>>;

    /// Cached complex-to-real plan for length `n`.
    fn c2r_plan(n: usize) -> Arc<dyn ComplexToReal<Self>>;

    /// `c = alpha * a * b + beta * c` for strided row/column layouts.
    ///
    /// # Safety
    /// Callers must guarantee that every index reachable through the given
    /// dimensions and strides lies inside the corresponding allocation.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_real {
    ($t:ty, $planner:ident, $erf:path, $gemm:path) => {
        thread_local! {
            static $planner: RefCell<RealFftPlanner<$t>> = RefCell::new(RealFftPlanner::new());
        }

        impl Real for $t {
            fn erf(self) -> Self {
                $erf(self)
            }

            fn r2c_plan(n: usize) -> Arc<dyn RealToComplex<Self>> {
                $planner.with(|p| p.borrow_mut().plan_fft_forward(n))
            }

            fn c2r_plan(n: usize) -> Arc<dyn ComplexToReal<Self>> {
                $planner.with(|p| p.borrow_mut().plan_fft_inverse(n))
            }

            unsafe fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: *const Self,
                rsa: isize,
                csa: isize,
                b: *const Self,
                rsb: isize,
                csb: isize,
                beta: Self,
                c: *mut Self,
                rsc: isize,
                csc: isize,
            ) {
                $gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_real!(f64, PLANNER_F64, libm::erf, matrixmultiply::dgemm);
impl_real!(f32, PLANNER_F32, libm::erff, matrixmultiply::sgemm);

/// Row-major matrix view used by [`gemm`]: `rows x cols` with explicit strides.
#[derive(Debug, Clone, Copy)]
pub struct MatLayout {
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl MatLayout {
    pub fn row_major(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_stride: cols, col_stride: 1 }
    }

    /// The transpose of a row-major `rows x cols` matrix.
    pub fn transposed(rows: usize, cols: usize) -> Self {
        Self { rows: cols, cols: rows, row_stride: 1, col_stride: cols }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride + 1
        }
    }
}

/// Safe wrapper over the blocked GEMM kernel: `c = alpha * a * b + beta * c`.
pub fn gemm<T: Real>(
    alpha: T,
    a: &[T],
    la: MatLayout,
    b: &[T],
    lb: MatLayout,
    beta: T,
    c: &mut [T],
    lc: MatLayout,
) {
    assert_eq!(la.cols, lb.rows, "gemm inner dimension");
    assert_eq!(la.rows, lc.rows, "gemm output rows");
    assert_eq!(lb.cols, lc.cols, "gemm output cols");
    assert!(la.span() <= a.len() && lb.span() <= b.len() && lc.span() <= c.len());
    if lc.rows == 0 || lc.cols == 0 {
        return;
    }
    // SAFETY: spans were checked against the slice lengths above.
    unsafe {
        T::gemm_raw(
            la.rows,
            la.cols,
            lb.cols,
            alpha,
            a.as_ptr(),
            la.row_stride as isize,
            la.col_stride as isize,
            b.as_ptr(),
            lb.row_stride as isize,
            lb.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            lc.row_stride as isize,
            lc.col_stride as isize,
        )
    }
}

/// Strided complex matrix inside an interleaved buffer, in complex-element units.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CLayout {
    pub offset: usize,
    pub row_stride: usize,
    pub col_stride: usize,
    pub conj: bool,
}

impl CLayout {
    pub fn new(offset: usize, row_stride: usize, col_stride: usize) -> Self {
        Self { offset, row_stride, col_stride, conj: false }
    }

    pub fn conj(self) -> Self {
        Self { conj: true, ..self }
    }

    fn end(&self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            self.offset + (rows - 1) * self.row_stride + (cols - 1) * self.col_stride + 1
        }
    }
}

/// `c (+)= op(a) op(b)` for complex `m x k` and `k x n` operands, where `op`
/// conjugates when the layout asks for it. Runs as four real GEMMs over the
/// interleaved storage; `accumulate = false` overwrites the addressed entries.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cgemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex<T>],
    la: CLayout,
    b: &[Complex<T>],
    lb: CLayout,
    c: &mut [Complex<T>],
    lc: CLayout,
    accumulate: bool,
) {
    assert!(la.end(m, k) <= a.len() && lb.end(k, n) <= b.len() && lc.end(m, n) <= c.len(), "cgemm bounds");
    assert!(!lc.conj, "cgemm output cannot be conjugated");
    if m == 0 || n == 0 {
        return;
    }
    let one = T::one();
    let sa = if la.conj { -one } else { one };
    let sb = if lb.conj { -one } else { one };
    let beta = if accumulate { one } else { T::zero() };
    let (ap, bp, cp) = (a.as_ptr() as *const T, b.as_ptr() as *const T, c.as_mut_ptr() as *mut T);
    let st = |l: CLayout| (2 * l.row_stride as isize, 2 * l.col_stride as isize);
    let ((ars, acs), (brs, bcs), (crs, ccs)) = (st(la), st(lb), st(lc));
    // SAFETY: `Complex<T>` is `repr(C)` `(re, im)`, so real parts sit at even and
    // imaginary parts at odd `T` offsets; the bounds were asserted above.
    unsafe {
        let (are, aim) = (ap.add(2 * la.offset), ap.add(2 * la.offset + 1));
        let (bre, bim) = (bp.add(2 * lb.offset), bp.add(2 * lb.offset + 1));
        let (cre, cim) = (cp.add(2 * lc.offset), cp.add(2 * lc.offset + 1));
        if k == 0 {
            if !accumulate {
                for i in 0..m {
                    for j in 0..n {
                        let o = (i as isize * crs + j as isize * ccs) as usize;
                        *cre.add(o) = T::zero();
                        *cim.add(o) = T::zero();
                    }
                }
            }
            return;
        }
        T::gemm_raw(m, k, n, one, are, ars, acs, bre, brs, bcs, beta, cre, crs, ccs);
        T::gemm_raw(m, k, n, -(sa * sb), aim, ars, acs, bim, brs, bcs, one, cre, crs, ccs);
        T::gemm_raw(m, k, n, sb, are, ars, acs, bim, brs, bcs, beta, cim, crs, ccs);
        T::gemm_raw(m, k, n, sa, aim, ars, acs, bre, brs, bcs, one, cim, crs, ccs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgemm_matches_naive_product() {
        let z = |a: f64, b: f64| Complex::new(a, b);
        let a: Vec<Complex<f64>> = (0..6).map(|i| z(i as f64 - 2.0, 0.5 * i as f64)).collect(); // 2x3
        let b: Vec<Complex<f64>> = (0..12).map(|i| z(0.25 * i as f64, 1.0 - i as f64)).collect(); // 3x4
        for (ca, cb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut la = CLayout::new(0, 3, 1);
            let mut lb = CLayout::new(0, 4, 1);
            if ca {
                la = la.conj();
            }
            if cb {
                lb = lb.conj();
            }
            let mut c = vec![z(1.0, 1.0); 8];
            cgemm(2, 3, 4, &a, la, &b, lb, &mut c, CLayout::new(0, 4, 1), true);
            for i in 0..2 {
                for j in 0..4 {
                    let mut acc = z(1.0, 1.0);
                    for l in 0..3 {
                        let x = if ca { a[i * 3 + l].conj() } else { a[i * 3 + l] };
                        let y = if cb { b[l * 4 + j].conj() } else { b[l * 4 + j] };
                        acc += x * y;
                    }
                    assert!((c[i * 4 + j] - acc).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gemm_matches_naive_product() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 + 1.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|i| (i as f64) * 0.5 - 2.0).collect(); // 3x4
        let mut c = vec![0.0; 8];
        gemm(
            1.0,
            &a,
            MatLayout::row_major(2, 3),
            &b,
            MatLayout::row_major(3, 4),
            0.0,
            &mut c,
            MatLayout::row_major(2, 4),
        );
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum();
                assert!((c[i * 4 + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_layout() {
        // a is 3x2 stored row-major; use it as 2x3.
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 1.0, 1.0];
        let mut c = [0.0f64; 2];
        gemm(
            1.0,
            &a,
            MatLayout::transposed(3, 2),
            &b,
            MatLayout::row_major(3, 1),
            0.0,
            &mut c,
            MatLayout::row_major(2, 1),
        );
        assert_eq!(c, [9.0, 12.0]);
    }

    #[test]
    fn erf_both_widths() {
        assert!((Real::erf(0.5f64) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((Real::erf(0.5f32) - 0.520_499_9).abs() < 1e-6);
    }
}
