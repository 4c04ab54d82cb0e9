use num_complex::Complex;

use super::tape::{Op, Slot, Tape};
use super::value::Value;
use crate::error::{Error, Result};
use crate::scalar::{cgemm, gemm, CLayout, MatLayout, Real};
use crate::spectral::{half_len, irfft_rows, mode_weight, rfft_rows, Spectrum, Tensor};

/// Adjoints produced by [`Tape::backward`].
///
/// Complex slots carry `dL/dRe + i dL/dIm`.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Value<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, slot: Slot) -> Option<&Value<T>> {
        self.grads.get(slot.0).and_then(|g| g.as_ref())
    }

    pub fn real(&self, slot: Slot) -> Option<&Tensor<T>> {
        match self.get(slot) {
            Some(Value::Real(t)) => Some(t),
            _ => None,
        }
    }

    pub fn complex(&self, slot: Slot) -> Option<&Spectrum<T>> {
        match self.get(slot) {
            Some(Value::Complex(s)) => Some(s),
            _ => None,
        }
    }

    pub fn take(&mut self, slot: Slot) -> Option<Value<T>> {
        self.grads.get_mut(slot.0).and_then(|g| g.take())
    }
}

fn add_into<T: Real>(grads: &mut [Option<Value<T>>], slot: Slot, g: Value<T>) {
    match &mut grads[slot.0] {
        Some(acc) => acc.accumulate(&g),
        empty => *empty = Some(g),
    }
}

fn dims3(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [b, c, n] => (b, c, n),
        [b, c] => (b, c, 1),
        _ => unreachable!("shape validated at record time"),
    }
}

fn real_of<T: Real>(v: &Value<T>) -> &Tensor<T> {
    match v {
        Value::Real(t) => t,
        Value::Complex(_) => unreachable!("type validated at record time"),
    }
}

fn complex_of<T: Real>(v: &Value<T>) -> &Spectrum<T> {
    match v {
        Value::Complex(s) => s,
        Value::Real(_) => unreachable!("type validated at record time"),
    }
}

impl<T: Real> Tape<T> {
    /// Reverse sweep from a scalar loss with seed `dL/dL = 1`.
    pub fn backward(&self, loss: Slot) -> Result<Gradients<T>> {
        self.backward_with_seed(loss, T::one())
    }

    pub fn backward_with_seed(&self, loss: Slot, seed: T) -> Result<Gradients<T>> {
        if loss.0 >= self.values.len() {
            return Err(Error::Contract(format!("loss slot {} does not exist", loss.0)));
        }
        let lv = match &self.values[loss.0] {
            Value::Real(t) if t.len() == 1 => t,
            other => {
                return Err(Error::Contract(format!(
                    "backward needs a scalar loss, slot {} has shape {:?}",
                    loss.0,
                    other.shape()
                )))
            }
        };
        let mut grads: Vec<Option<Value<T>>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Value::Real(Tensor::filled(lv.shape(), seed)));

        for idx in (0..=loss.0).rev() {
            if !self.needs_grad[idx] {
                continue;
            }
            if matches!(self.ops[idx], Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            self.propagate(idx, &gy, &mut grads)?;
            if self.requires_grad[idx] {
                grads[idx] = Some(gy);
            }
        }

        for (i, g) in grads.iter_mut().enumerate() {
            if self.requires_grad[i] {
                if g.is_none() {
                    *g = Some(self.values[i].zeros_like());
                }
            } else if !matches!(self.ops[i], Op::Leaf) {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, s: Slot) -> bool {
        self.needs_grad[s.0]
    }

    fn propagate(&self, idx: usize, gy: &Value<T>, grads: &mut [Option<Value<T>>]) -> Result<()> {
        match &self.ops[idx] {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for s in [*a, *b] {
                    if self.wants(s) {
                        add_into(grads, s, gy.clone());
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    add_into(grads, *a, gy.clone());
                }
                if self.wants(*b) {
                    let mut neg = gy.clone();
                    for v in neg.flat_mut() {
                        *v = -*v;
                    }
                    add_into(grads, *b, neg);
                }
            }
            Op::Mul(a, b) => {
                let g = real_of(gy);
                let (av, bv) = (real_of(&self.values[a.0]), real_of(&self.values[b.0]));
                if self.wants(*a) {
                    add_into(grads, *a, Value::Real(g.zip_map(bv, |p, q| p * q)?));
                }
                if self.wants(*b) {
                    add_into(grads, *b, Value::Real(g.zip_map(av, |p, q| p * q)?));
                }
            }
            Op::Scale(a, s) => {
                if self.wants(*a) {
                    let mut g = gy.clone();
                    for v in g.flat_mut() {
                        *v *= *s;
                    }
                    add_into(grads, *a, g);
                }
            }
            Op::MatMul(a, b) => {
                let g = real_of(gy);
                let (av, bv) = (real_of(&self.values[a.0]), real_of(&self.values[b.0]));
                let (m, k) = (av.shape()[0], av.shape()[1]);
                let n = if bv.rank() == 2 { bv.shape()[1] } else { 1 };
                if self.wants(*a) {
                    let mut ga = Tensor::zeros(av.shape());
                    gemm(
                        T::one(),
                        g.data(),
                        MatLayout::row_major(m, n),
                        bv.data(),
                        MatLayout::transposed(k, n),
                        T::zero(),
                        ga.data_mut(),
                        MatLayout::row_major(m, k),
                    );
                    add_into(grads, *a, Value::Real(ga));
                }
                if self.wants(*b) {
                    let mut gb = Tensor::zeros(bv.shape());
                    gemm(
                        T::one(),
                        av.data(),
                        MatLayout::transposed(m, k),
                        g.data(),
                        MatLayout::row_major(m, n),
                        T::zero(),
                        gb.data_mut(),
                        MatLayout::row_major(k, n),
                    );
                    add_into(grads, *b, Value::Real(gb));
                }
            }
            Op::ChannelMix { x, w } => {
                let g = real_of(gy);
                let (xv, wv) = (real_of(&self.values[x.0]), real_of(&self.values[w.0]));
                let (b, k, n) = dims3(xv.shape());
                let m = wv.shape()[0];
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(xv.shape());
                    if n == 1 {
                        gemm(
                            T::one(),
                            g.data(),
                            MatLayout::row_major(b, m),
                            wv.data(),
                            MatLayout::row_major(m, k),
                            T::zero(),
                            gx.data_mut(),
                            MatLayout::row_major(b, k),
                        );
                    } else {
                        for (gb, gxb) in g.data().chunks_exact(m * n).zip(gx.data_mut().chunks_exact_mut(k * n)) {
                            gemm(
                                T::one(),
                                wv.data(),
                                MatLayout::transposed(m, k),
                                gb,
                                MatLayout::row_major(m, n),
                                T::zero(),
                                gxb,
                                MatLayout::row_major(k, n),
                            );
                        }
                    }
                    add_into(grads, *x, Value::Real(gx));
                }
                if self.wants(*w) {
                    let mut gw = Tensor::zeros(wv.shape());
                    if n == 1 {
                        gemm(
                            T::one(),
                            g.data(),
                            MatLayout::transposed(b, m),
                            xv.data(),
                            MatLayout::row_major(b, k),
                            T::zero(),
                            gw.data_mut(),
                            MatLayout::row_major(m, k),
                        );
                    } else {
                        for (gb, xb) in g.data().chunks_exact(m * n).zip(xv.data().chunks_exact(k * n)) {
                            gemm(
                                T::one(),
                                gb,
                                MatLayout::row_major(m, n),
                                xb,
                                MatLayout::transposed(k, n),
                                T::one(),
                                gw.data_mut(),
                                MatLayout::row_major(m, k),
                            );
                        }
                    }
                    add_into(grads, *w, Value::Real(gw));
                }
            }
            Op::ChannelScale { x, s } => {
                let g = real_of(gy);
                let (xv, sv) = (real_of(&self.values[x.0]), real_of(&self.values[s.0]));
                let (bx, c, n) = dims3(xv.shape());
                let bs = sv.shape()[0];
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(xv.shape());
                    for bi in 0..bs {
                        let xb = if bx == 1 { 0 } else { bi };
                        for ci in 0..c {
                            let f = sv.data()[bi * c + ci];
                            let src = &g.data()[(bi * c + ci) * n..(bi * c + ci + 1) * n];
                            let dst = &mut gx.data_mut()[(xb * c + ci) * n..(xb * c + ci + 1) * n];
                            for (d, &v) in dst.iter_mut().zip(src) {
                                *d += f * v;
                            }
                        }
                    }
                    add_into(grads, *x, Value::Real(gx));
                }
                if self.wants(*s) {
                    let mut gs = Tensor::zeros(sv.shape());
                    for bi in 0..bs {
                        let xb = if bx == 1 { 0 } else { bi };
                        for ci in 0..c {
                            let gsrc = &g.data()[(bi * c + ci) * n..(bi * c + ci + 1) * n];
                            let xsrc = &xv.data()[(xb * c + ci) * n..(xb * c + ci + 1) * n];
                            gs.data_mut()[bi * c + ci] = gsrc.iter().zip(xsrc).map(|(&p, &q)| p * q).sum();
                        }
                    }
                    add_into(grads, *s, Value::Real(gs));
                }
            }
            Op::AddBias { x, b } => {
                if self.wants(*x) {
                    add_into(grads, *x, gy.clone());
                }
                if self.wants(*b) {
                    let g = real_of(gy);
                    let (_, c, n) = dims3(g.shape());
                    let mut gb = Tensor::zeros(&[c]);
                    for blk in g.data().chunks_exact(c * n) {
                        for ci in 0..c {
                            gb.data_mut()[ci] += blk[ci * n..(ci + 1) * n].iter().copied().sum::<T>();
                        }
                    }
                    add_into(grads, *b, Value::Real(gb));
                }
            }
            Op::Activation { x, kind, deriv } => {
                if self.wants(*x) {
                    let g = match deriv {
                        Some(d) => real_of(gy).zip_map(d, |gv, dv| gv * dv)?,
                        None => real_of(gy).zip_map(real_of(&self.values[x.0]), |gv, xv| gv * kind.derivative(xv))?,
                    };
                    add_into(grads, *x, Value::Real(g));
                }
            }
            Op::Rfft { x } => {
                if self.wants(*x) {
                    let g = complex_of(gy);
                    let n = real_of(&self.values[x.0]).last_dim();
                    let nf = half_len(n);
                    // x_bar = n * irfft(G / w)
                    let mut scaled = g.clone();
                    for row in scaled.data_mut().chunks_exact_mut(nf) {
                        for (kk, z) in row.iter_mut().enumerate() {
                            if mode_weight(kk, n) == 2 {
                                *z = *z * T::lit(0.5);
                            }
                        }
                    }
                    let mut gx = Tensor::zeros(real_of(&self.values[x.0]).shape());
                    irfft_rows(scaled.data(), n, gx.data_mut())?;
                    let nn = T::lit(n as f64);
                    for v in gx.data_mut() {
                        *v *= nn;
                    }
                    add_into(grads, *x, Value::Real(gx));
                }
            }
            Op::Irfft { x, n } => {
                if self.wants(*x) {
                    let g = real_of(gy);
                    let nf = half_len(*n);
                    let mut gx = Spectrum::zeros(complex_of(&self.values[x.0]).shape());
                    rfft_rows(g.data(), *n, gx.data_mut())?;
                    let inv_n = T::one() / T::lit(*n as f64);
                    for row in gx.data_mut().chunks_exact_mut(nf) {
                        for (kk, z) in row.iter_mut().enumerate() {
                            let w = T::lit(mode_weight(kk, *n) as f64);
                            *z = *z * (w * inv_n);
                            if w == T::one() {
                                z.im = T::zero();
                            }
                        }
                    }
                    add_into(grads, *x, Value::Complex(gx));
                }
            }
            Op::SpectralMix { x, r } => {
                let g = complex_of(gy);
                let (xv, rv) = (complex_of(&self.values[x.0]), complex_of(&self.values[r.0]));
                let (b, cin, nf) = dims3(xv.shape());
                let (k, cout) = (rv.shape()[0], rv.shape()[1]);
                if self.wants(*x) {
                    let mut gx = Spectrum::zeros(xv.shape());
                    for m in 0..k {
                        // GX[:, :, m] (cin x B) = R[m]^H (cin x cout) * G[:, :, m] (cout x B)
                        cgemm(
                            cin,
                            cout,
                            b,
                            rv.data(),
                            CLayout::new(m * cout * cin, 1, cin).conj(),
                            g.data(),
                            CLayout::new(m, nf, cout * nf),
                            gx.data_mut(),
                            CLayout::new(m, nf, cin * nf),
                            false,
                        );
                    }
                    add_into(grads, *x, Value::Complex(gx));
                }
                if self.wants(*r) {
                    let mut gr = Spectrum::zeros(rv.shape());
                    for m in 0..k {
                        // GR[m] (cout x cin) = G[:, :, m] (cout x B) * X[:, :, m]^H (B x cin)
                        cgemm(
                            cout,
                            b,
                            cin,
                            g.data(),
                            CLayout::new(m, nf, cout * nf),
                            xv.data(),
                            CLayout::new(m, cin * nf, nf).conj(),
                            gr.data_mut(),
                            CLayout::new(m * cout * cin, cin, 1),
                            false,
                        );
                    }
                    add_into(grads, *r, Value::Complex(gr));
                }
            }
            Op::ModeModulate { x, phi } => {
                let g = complex_of(gy);
                let (xv, pv) = (complex_of(&self.values[x.0]), complex_of(&self.values[phi.0]));
                let (bx, c, nf) = dims3(xv.shape());
                let (b, h, k) = dims3(pv.shape());
                let dk = c / h;
                if self.wants(*x) {
                    let mut gx = Spectrum::zeros(xv.shape());
                    for bi in 0..b {
                        let xb = if bx == 1 { 0 } else { bi };
                        for ci in 0..c {
                            let head = ci / dk;
                            let p = &pv.data()[(bi * h + head) * k..(bi * h + head + 1) * k];
                            let src = &g.data()[(bi * c + ci) * nf..(bi * c + ci) * nf + k];
                            let dst = &mut gx.data_mut()[(xb * c + ci) * nf..(xb * c + ci) * nf + k];
                            for ((d, gv), f) in dst.iter_mut().zip(src).zip(p) {
                                *d += f.conj() * gv;
                            }
                        }
                    }
                    add_into(grads, *x, Value::Complex(gx));
                }
                if self.wants(*phi) {
                    let mut gp = Spectrum::zeros(pv.shape());
                    for bi in 0..b {
                        let xb = if bx == 1 { 0 } else { bi };
                        for ci in 0..c {
                            let head = ci / dk;
                            let src = &g.data()[(bi * c + ci) * nf..(bi * c + ci) * nf + k];
                            let xs = &xv.data()[(xb * c + ci) * nf..(xb * c + ci) * nf + k];
                            let dst = &mut gp.data_mut()[(bi * h + head) * k..(bi * h + head + 1) * k];
                            for ((d, gv), xx) in dst.iter_mut().zip(src).zip(xs) {
                                *d += gv * xx.conj();
                            }
                        }
                    }
                    add_into(grads, *phi, Value::Complex(gp));
                }
            }
            Op::TimeModes { phi, a } => {
                let g = complex_of(gy);
                let (pv, av) = (real_of(&self.values[phi.0]), complex_of(&self.values[a.0]));
                let (b, c) = (pv.shape()[0], pv.shape()[1]);
                let hk = av.shape()[0] * av.shape()[1];
                if self.wants(*phi) {
                    let mut gp = Tensor::zeros(pv.shape());
                    for bi in 0..b {
                        for hm in 0..hk {
                            let gv = g.data()[bi * hk + hm];
                            let row = &av.data()[hm * c..(hm + 1) * c];
                            let dst = &mut gp.data_mut()[bi * c..(bi + 1) * c];
                            for (d, z) in dst.iter_mut().zip(row) {
                                *d += gv.re * z.re + gv.im * z.im;
                            }
                        }
                    }
                    add_into(grads, *phi, Value::Real(gp));
                }
                if self.wants(*a) {
                    let mut ga = Spectrum::zeros(av.shape());
                    for bi in 0..b {
                        let p = &pv.data()[bi * c..(bi + 1) * c];
                        for hm in 0..hk {
                            let gv = g.data()[bi * hk + hm];
                            let dst = &mut ga.data_mut()[hm * c..(hm + 1) * c];
                            for (d, &f) in dst.iter_mut().zip(p) {
                                *d += gv * f;
                            }
                        }
                    }
                    add_into(grads, *a, Value::Complex(ga));
                }
            }
            Op::ClampUnit { x } => {
                if self.wants(*x) {
                    let xv = real_of(&self.values[x.0]);
                    let g = real_of(gy).zip_map(xv, |gv, v| if v.abs() <= T::one() { gv } else { T::zero() })?;
                    add_into(grads, *x, Value::Real(g));
                }
            }
            Op::RadialClamp { x } => {
                if self.wants(*x) {
                    let xv = complex_of(&self.values[x.0]);
                    let g = complex_of(gy).zip_map(xv, |gv, z| {
                        let r = z.norm();
                        if r <= T::one() {
                            gv
                        } else {
                            let dot = (z.re * gv.re + z.im * gv.im) / (r * r * r);
                            Complex::new(gv.re / r - z.re * dot, gv.im / r - z.im * dot)
                        }
                    })?;
                    add_into(grads, *x, Value::Complex(g));
                }
            }
            Op::Pad { x, pad } => {
                if self.wants(*x) {
                    let xv = real_of(&self.values[x.0]);
                    let n = xv.last_dim();
                    let mut gx = Tensor::zeros(xv.shape());
                    for (src, dst) in real_of(gy).data().chunks_exact(n + pad).zip(gx.data_mut().chunks_exact_mut(n)) {
                        dst.copy_from_slice(&src[..n]);
                    }
                    add_into(grads, *x, Value::Real(gx));
                }
            }
            Op::Crop { x, n } => {
                if self.wants(*x) {
                    let xv = real_of(&self.values[x.0]);
                    let full = xv.last_dim();
                    let mut gx = Tensor::zeros(xv.shape());
                    for (src, dst) in real_of(gy).data().chunks_exact(*n).zip(gx.data_mut().chunks_exact_mut(full)) {
                        dst[..*n].copy_from_slice(src);
                    }
                    add_into(grads, *x, Value::Real(gx));
                }
            }
            Op::Sum { x } => {
                if self.wants(*x) {
                    let s = real_of(gy).data()[0];
                    add_into(grads, *x, Value::Real(Tensor::filled(self.values[x.0].shape(), s)));
                }
            }
            Op::SumSquares { x } => {
                if self.wants(*x) {
                    let s = real_of(gy).data()[0] * T::lit(2.0);
                    let g = match &self.values[x.0] {
                        Value::Real(t) => Value::Real(t.scale(s)),
                        Value::Complex(z) => Value::Complex(z.map(|v| v * s)),
                    };
                    add_into(grads, *x, g);
                }
            }
            Op::Mse { pred, target, denom } => {
                if self.wants(*pred) {
                    let s = real_of(gy).data()[0] * T::lit(2.0) / *denom;
                    let g = real_of(&self.values[pred.0]).zip_map(target, |p, t| (p - t) * s)?;
                    add_into(grads, *pred, Value::Real(g));
                }
            }
        }
        Ok(())
    }
}
