use num_complex::Complex;

use super::value::Value;
use crate::error::{Error, Result};
use crate::scalar::{cgemm, gemm, CLayout, MatLayout, Real};
use crate::spectral::{half_len, irfft_rows, rfft_rows, Activation, Spectrum, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot(pub(crate) usize);

impl Slot {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op<T> {
    Leaf,
    Add(Slot, Slot),
    Sub(Slot, Slot),
    Mul(Slot, Slot),
    Scale(Slot, T),
    MatMul(Slot, Slot),
    ChannelMix { x: Slot, w: Slot },
    ChannelScale { x: Slot, s: Slot },
    AddBias { x: Slot, b: Slot },
    /// `deriv` holds `sigma'(x)` when a gradient is needed.
    Activation { x: Slot, kind: Activation, deriv: Option<Tensor<T>> },
    Rfft { x: Slot },
    Irfft { x: Slot, n: usize },
    SpectralMix { x: Slot, r: Slot },
    ModeModulate { x: Slot, phi: Slot },
    TimeModes { phi: Slot, a: Slot },
    ClampUnit { x: Slot },
    RadialClamp { x: Slot },
    Pad { x: Slot, pad: usize },
    Crop { x: Slot, n: usize },
    Sum { x: Slot },
    SumSquares { x: Slot },
    Mse { pred: Slot, target: Tensor<T>, denom: T },
}

/// Operation kinds accepted by [`Tape::record`].
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind<T> {
    Add,
    Sub,
    Mul,
    Scale(T),
    MatMul,
    ChannelMix,
    ChannelScale,
    AddBias,
    Activation(Activation),
    Dft,
    Idft(usize),
    SpectralMix,
    ModeModulate,
    TimeModes,
    ClampUnit,
    RadialClamp,
    Pad(usize),
    Crop(usize),
    Sum,
    SumSquares,
}

/// Eagerly evaluated computation record for reverse-mode differentiation.
///
/// Values are computed when an operation is recorded; [`Tape::backward`]
/// walks the nodes in reverse. Batched model tensors use the
/// `[batch, channel, grid]` layout so transforms run over the last axis.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub(crate) ops: Vec<Op<T>>,
    pub(crate) values: Vec<Value<T>>,
    pub(crate) requires_grad: Vec<bool>,
    pub(crate) needs_grad: Vec<bool>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn dims3(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [b, c, n] => Ok((b, c, n)),
        [b, c] => Ok((b, c, 1)),
        _ => Err(Error::shape(format!("{what}: expected [batch, channels(, grid)], got {shape:?}"))),
    }
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { ops: Vec::new(), values: Vec::new(), requires_grad: Vec::new(), needs_grad: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Records an input. Parameters pass `requires_grad = true`.
    pub fn leaf(&mut self, value: impl Into<Value<T>>, requires_grad: bool) -> Slot {
        self.ops.push(Op::Leaf);
        self.values.push(value.into());
        self.requires_grad.push(requires_grad);
        self.needs_grad.push(requires_grad);
        Slot(self.values.len() - 1)
    }

    pub fn param(&mut self, value: impl Into<Value<T>>) -> Slot {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: impl Into<Value<T>>) -> Slot {
        self.leaf(value, false)
    }

    pub fn value(&self, slot: Slot) -> &Value<T> {
        &self.values[slot.0]
    }

    pub fn real(&self, slot: Slot) -> Result<&Tensor<T>> {
        self.values[slot.0].as_real()
    }

    pub fn complex(&self, slot: Slot) -> Result<&Spectrum<T>> {
        self.values[slot.0].as_complex()
    }

    pub fn requires_grad(&self, slot: Slot) -> bool {
        self.requires_grad[slot.0]
    }

    fn check(&self, slot: Slot) -> Result<()> {
        if slot.0 < self.values.len() {
            Ok(())
        } else {
            Err(Error::Contract(format!("slot {} does not exist on this tape", slot.0)))
        }
    }

    fn push(&mut self, op: Op<T>, inputs: &[Slot], value: Value<T>) -> Slot {
        let needs = inputs.iter().any(|s| self.needs_grad[s.0]);
        self.ops.push(op);
        self.values.push(value);
        self.requires_grad.push(false);
        self.needs_grad.push(needs);
        Slot(self.values.len() - 1)
    }

    /// Generic entry point; dispatches to the typed recording methods.
    pub fn record(&mut self, kind: OpKind<T>, inputs: &[Slot]) -> Result<Slot> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(Error::Contract(format!("{kind:?} takes {n} inputs, got {}", inputs.len())))
            }
        };
        match kind {
            OpKind::Add => arity(2).and_then(|_| self.add(inputs[0], inputs[1])),
            OpKind::Sub => arity(2).and_then(|_| self.sub(inputs[0], inputs[1])),
            OpKind::Mul => arity(2).and_then(|_| self.mul(inputs[0], inputs[1])),
            OpKind::Scale(s) => arity(1).and_then(|_| self.scale(inputs[0], s)),
            OpKind::MatMul => arity(2).and_then(|_| self.matmul(inputs[0], inputs[1])),
            OpKind::ChannelMix => arity(2).and_then(|_| self.channel_mix(inputs[0], inputs[1])),
            OpKind::ChannelScale => arity(2).and_then(|_| self.channel_scale(inputs[0], inputs[1])),
            OpKind::AddBias => arity(2).and_then(|_| self.add_bias(inputs[0], inputs[1])),
            OpKind::Activation(k) => arity(1).and_then(|_| self.activation(inputs[0], k)),
            OpKind::Dft => arity(1).and_then(|_| self.rfft(inputs[0])),
            OpKind::Idft(n) => arity(1).and_then(|_| self.irfft(inputs[0], n)),
            OpKind::SpectralMix => arity(2).and_then(|_| self.spectral_mix(inputs[0], inputs[1])),
            OpKind::ModeModulate => arity(2).and_then(|_| self.mode_modulate(inputs[0], inputs[1])),
            OpKind::TimeModes => arity(2).and_then(|_| self.time_modes(inputs[0], inputs[1])),
            OpKind::ClampUnit => arity(1).and_then(|_| self.clamp_unit(inputs[0])),
            OpKind::RadialClamp => arity(1).and_then(|_| self.radial_clamp(inputs[0])),
            OpKind::Pad(p) => arity(1).and_then(|_| self.pad(inputs[0], p)),
            OpKind::Crop(n) => arity(1).and_then(|_| self.crop(inputs[0], n)),
            OpKind::Sum => arity(1).and_then(|_| self.sum(inputs[0])),
            OpKind::SumSquares => arity(1).and_then(|_| self.sum_squares(inputs[0])),
        }
    }

    pub fn add(&mut self, a: Slot, b: Slot) -> Result<Slot> {
        self.check(a)?;
        self.check(b)?;
        let v = match (self.value(a), self.value(b)) {
            (Value::Real(x), Value::Real(y)) => Value::Real(x.add(y)?),
            (Value::Complex(x), Value::Complex(y)) => Value::Complex(x.zip_map(y, |p, q| p + q)?),
            _ => return Err(Error::shape("add: mixed real and complex operands")),
        };
        Ok(self.push(Op::Add(a, b), &[a, b], v))
    }

    pub fn sub(&mut self, a: Slot, b: Slot) -> Result<Slot> {
        self.check(a)?;
        self.check(b)?;
        let v = match (self.value(a), self.value(b)) {
            (Value::Real(x), Value::Real(y)) => Value::Real(x.sub(y)?),
            (Value::Complex(x), Value::Complex(y)) => Value::Complex(x.zip_map(y, |p, q| p - q)?),
            _ => return Err(Error::shape("sub: mixed real and complex operands")),
        };
        Ok(self.push(Op::Sub(a, b), &[a, b], v))
    }

    /// Elementwise product of two real tensors of equal shape.
    pub fn mul(&mut self, a: Slot, b: Slot) -> Result<Slot> {
        self.check(a)?;
        self.check(b)?;
        let v = self.real(a)?.zip_map(self.real(b)?, |p, q| p * q)?;
        Ok(self.push(Op::Mul(a, b), &[a, b], Value::Real(v)))
    }

    pub fn scale(&mut self, a: Slot, s: T) -> Result<Slot> {
        self.check(a)?;
        let v = match self.value(a) {
            Value::Real(x) => Value::Real(x.scale(s)),
            Value::Complex(x) => Value::Complex(x.map(|z| z * s)),
        };
        Ok(self.push(Op::Scale(a, s), &[a], v))
    }

    /// Matrix product `[m, k] x [k, n] -> [m, n]` (or `[k] -> [m]`).
    pub fn matmul(&mut self, a: Slot, b: Slot) -> Result<Slot> {
        self.check(a)?;
        self.check(b)?;
        let (x, y) = (self.real(a)?, self.real(b)?);
        let (m, k) = match *x.shape() {
            [m, k] => (m, k),
            _ => return Err(Error::shape(format!("matmul: left operand must be a matrix, got {:?}", x.shape()))),
        };
        let (k2, n, out_shape) = match *y.shape() {
            [k2, n] => (k2, n, vec![m, n]),
            [k2] => (k2, 1, vec![m]),
            _ => return Err(Error::shape(format!("matmul: bad right operand {:?}", y.shape()))),
        };
        if k != k2 {
            return Err(Error::shape(format!("matmul: inner dims {k} vs {k2}")));
        }
        let mut out = Tensor::zeros(&out_shape);
        gemm(
            T::one(),
            x.data(),
            MatLayout::row_major(m, k),
            y.data(),
            MatLayout::row_major(k, n),
            T::zero(),
            out.data_mut(),
            MatLayout::row_major(m, n),
        );
        Ok(self.push(Op::MatMul(a, b), &[a, b], Value::Real(out)))
    }

    /// Pointwise channel mixing: `y[b, :, j] = W x[b, :, j]` with `W: [out, in]`.
    pub fn channel_mix(&mut self, x: Slot, w: Slot) -> Result<Slot> {
        self.check(x)?;
        self.check(w)?;
        let (xv, wv) = (self.real(x)?, self.real(w)?);
        let (b, k, n) = dims3(xv.shape(), "channel_mix")?;
        let (m, k2) = match *wv.shape() {
            [m, k2] => (m, k2),
            _ => return Err(Error::shape(format!("channel_mix: weight must be a matrix, got {:?}", wv.shape()))),
        };
        if k != k2 {
            return Err(Error::shape(format!("channel_mix: {k} input channels vs weight {m}x{k2}")));
        }
        let mut shape = xv.shape().to_vec();
        shape[1] = m;
        let mut out = Tensor::zeros(&shape);
        if n == 1 {
            gemm(
                T::one(),
                xv.data(),
                MatLayout::row_major(b, k),
                wv.data(),
                MatLayout::transposed(m, k),
                T::zero(),
                out.data_mut(),
                MatLayout::row_major(b, m),
            );
        } else {
            for (xb, yb) in xv.data().chunks_exact(k * n).zip(out.data_mut().chunks_exact_mut(m * n)) {
                gemm(
                    T::one(),
                    wv.data(),
                    MatLayout::row_major(m, k),
                    xb,
                    MatLayout::row_major(k, n),
                    T::zero(),
                    yb,
                    MatLayout::row_major(m, n),
                );
            }
        }
        Ok(self.push(Op::ChannelMix { x, w }, &[x, w], Value::Real(out)))
    }

    /// `y[b, c, j] = s[b, c] * x[b', c, j]`, where `x` may have batch 1.
    pub fn channel_scale(&mut self, x: Slot, s: Slot) -> Result<Slot> {
        self.check(x)?;
        self.check(s)?;
        let (xv, sv) = (self.real(x)?, self.real(s)?);
        let (bx, c, n) = dims3(xv.shape(), "channel_scale")?;
        let (bs, cs) = match *sv.shape() {
            [bs, cs] => (bs, cs),
            _ => return Err(Error::shape(format!("channel_scale: scales must be [batch, channels], got {:?}", sv.shape()))),
        };
        if cs != c || !(bx == bs || bx == 1) {
            return Err(Error::shape(format!("channel_scale: x {:?} vs s {:?}", xv.shape(), sv.shape())));
        }
        let mut shape = xv.shape().to_vec();
        shape[0] = bs;
        let mut out = Tensor::zeros(&shape);
        let xd = xv.data();
        for (bi, yb) in out.data_mut().chunks_exact_mut(c * n).enumerate() {
            let xb = if bx == 1 { &xd[..c * n] } else { &xd[bi * c * n..(bi + 1) * c * n] };
            for ci in 0..c {
                let f = sv.data()[bi * c + ci];
                for (y, &xx) in yb[ci * n..(ci + 1) * n].iter_mut().zip(&xb[ci * n..(ci + 1) * n]) {
                    *y = f * xx;
                }
            }
        }
        Ok(self.push(Op::ChannelScale { x, s }, &[x, s], Value::Real(out)))
    }

    /// Adds a per-channel bias `[C]` to `[B, C, N]` or `[B, C]`.
    pub fn add_bias(&mut self, x: Slot, b: Slot) -> Result<Slot> {
        self.check(x)?;
        self.check(b)?;
        let (xv, bv) = (self.real(x)?, self.real(b)?);
        let (_, c, n) = dims3(xv.shape(), "add_bias")?;
        if bv.shape() != [c] {
            return Err(Error::shape(format!("add_bias: bias {:?} for {c} channels", bv.shape())));
        }
        let mut out = xv.clone();
        for yb in out.data_mut().chunks_exact_mut(c * n) {
            for ci in 0..c {
                let f = bv.data()[ci];
                for y in &mut yb[ci * n..(ci + 1) * n] {
                    *y += f;
                }
            }
        }
        Ok(self.push(Op::AddBias { x, b }, &[x, b], Value::Real(out)))
    }

    pub fn activation(&mut self, x: Slot, kind: Activation) -> Result<Slot> {
        self.check(x)?;
        let xv = self.real(x)?;
        if !self.needs_grad[x.0] {
            let out = xv.map(|v| kind.apply(v));
            return Ok(self.push(Op::Activation { x, kind, deriv: None }, &[x], Value::Real(out)));
        }
        let mut out = Vec::with_capacity(xv.len());
        let mut deriv = Vec::with_capacity(xv.len());
        for &v in xv.data() {
            let (y, d) = kind.apply_with_derivative(v);
            out.push(y);
            deriv.push(d);
        }
        let shape = xv.shape().to_vec();
        let out = Tensor::new(shape.clone(), out)?;
        let deriv = Tensor::new(shape, deriv)?;
        Ok(self.push(Op::Activation { x, kind, deriv: Some(deriv) }, &[x], Value::Real(out)))
    }

    /// Real-to-complex transform along the last axis.
    pub fn rfft(&mut self, x: Slot) -> Result<Slot> {
        self.check(x)?;
        let xv = self.real(x)?;
        let n = xv.last_dim();
        if xv.rank() == 0 || n < 2 {
            return Err(Error::InvalidLength(n));
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = half_len(n);
        let mut out = Spectrum::zeros(&shape);
        rfft_rows(xv.data(), n, out.data_mut())?;
        Ok(self.push(Op::Rfft { x }, &[x], Value::Complex(out)))
    }

    /// Complex-to-real inverse transform (with `1/n`) along the last axis.
    pub fn irfft(&mut self, x: Slot, n: usize) -> Result<Slot> {
        self.check(x)?;
        let xv = self.complex(x)?;
        if n < 2 {
            return Err(Error::InvalidLength(n));
        }
        if xv.shape().is_empty() || xv.last_dim() != half_len(n) {
            return Err(Error::shape(format!("irfft: {} modes for n = {n}", xv.last_dim())));
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let mut out = Tensor::zeros(&shape);
        irfft_rows(xv.data(), n, out.data_mut())?;
        Ok(self.push(Op::Irfft { x, n }, &[x], Value::Real(out)))
    }

    /// Mode-wise channel mixing on the lowest `k` modes; higher modes are zero.
    ///
    /// `x: [B, Cin, nf]`, `r: [k, Cout, Cin]` gives `[B, Cout, nf]` with
    /// `y[b, o, m] = sum_i r[m, o, i] x[b, i, m]` for `m < k`.
    pub fn spectral_mix(&mut self, x: Slot, r: Slot) -> Result<Slot> {
        self.check(x)?;
        self.check(r)?;
        let (xv, rv) = (self.complex(x)?, self.complex(r)?);
        let (b, cin, nf) = match *xv.shape() {
            [b, c, nf] => (b, c, nf),
            _ => return Err(Error::shape(format!("spectral_mix: x must be [B, C, modes], got {:?}", xv.shape()))),
        };
        let (k, cout, cin2) = match *rv.shape() {
            [k, o, i] => (k, o, i),
            _ => return Err(Error::shape(format!("spectral_mix: kernel must be [modes, out, in], got {:?}", rv.shape()))),
        };
        if cin != cin2 || k > nf {
            return Err(Error::shape(format!("spectral_mix: x {:?} vs kernel {:?}", xv.shape(), rv.shape())));
        }
        let mut out = Spectrum::zeros(&[b, cout, nf]);
        for m in 0..k {
            // Y[:, :, m] (cout x B) = R[m] (cout x cin) * X[:, :, m] (cin x B)
            cgemm(
                cout,
                cin,
                b,
                rv.data(),
                CLayout::new(m * cout * cin, cin, 1),
                xv.data(),
                CLayout::new(m, nf, cin * nf),
                out.data_mut(),
                CLayout::new(m, nf, cout * nf),
                false,
            );
        }
        Ok(self.push(Op::SpectralMix { x, r }, &[x, r], Value::Complex(out)))
    }

    /// Per-head complex modulation of the lowest `k` modes.
    ///
    /// `x: [Bx, C, nf]` (with `Bx` equal to `B` or 1), `phi: [B, h, k]`; channel
    /// `c` belongs to head `c / (C / h)`. Modes `>= k` are zeroed.
    pub fn mode_modulate(&mut self, x: Slot, phi: Slot) -> Result<Slot> {
        self.check(x)?;
        self.check(phi)?;
        let (xv, pv) = (self.complex(x)?, self.complex(phi)?);
        let (bx, c, nf) = match *xv.shape() {
            [b, c, nf] => (b, c, nf),
            _ => return Err(Error::shape(format!("mode_modulate: x must be [B, C, modes], got {:?}", xv.shape()))),
        };
        let (b, h, k) = match *pv.shape() {
            [b, h, k] => (b, h, k),
            _ => return Err(Error::shape(format!("mode_modulate: phi must be [B, heads, modes], got {:?}", pv.shape()))),
        };
        if h == 0 || c % h != 0 || k > nf || !(bx == b || bx == 1) {
            return Err(Error::shape(format!("mode_modulate: x {:?} vs phi {:?}", xv.shape(), pv.shape())));
        }
        let dk = c / h;
        let mut out = Spectrum::zeros(&[b, c, nf]);
        for bi in 0..b {
            let xb = if bx == 1 { 0 } else { bi };
            for ci in 0..c {
                let head = ci / dk;
                let src = &xv.data()[(xb * c + ci) * nf..(xb * c + ci) * nf + k];
                let p = &pv.data()[(bi * h + head) * k..(bi * h + head + 1) * k];
                let dst = &mut out.data_mut()[(bi * c + ci) * nf..(bi * c + ci) * nf + k];
                for ((d, s), f) in dst.iter_mut().zip(src).zip(p) {
                    *d = s * f;
                }
            }
        }
        Ok(self.push(Op::ModeModulate { x, phi }, &[x, phi], Value::Complex(out)))
    }

    /// `y[b, i, m] = sum_c phi[b, c] a[i, m, c]` for real `phi: [B, c]` and complex `a: [h, k, c]`.
    pub fn time_modes(&mut self, phi: Slot, a: Slot) -> Result<Slot> {
        self.check(phi)?;
        self.check(a)?;
        let (pv, av) = (self.real(phi)?, self.complex(a)?);
        let (b, c) = match *pv.shape() {
            [b, c] => (b, c),
            _ => return Err(Error::shape(format!("time_modes: phi must be [B, c], got {:?}", pv.shape()))),
        };
        let (h, k, c2) = match *av.shape() {
            [h, k, c2] => (h, k, c2),
            _ => return Err(Error::shape(format!("time_modes: table must be [heads, modes, c], got {:?}", av.shape()))),
        };
        if c != c2 {
            return Err(Error::shape(format!("time_modes: phi {:?} vs table {:?}", pv.shape(), av.shape())));
        }
        let mut out = Spectrum::zeros(&[b, h, k]);
        for bi in 0..b {
            let p = &pv.data()[bi * c..(bi + 1) * c];
            for (hm, dst) in out.data_mut()[bi * h * k..(bi + 1) * h * k].iter_mut().enumerate() {
                let row = &av.data()[hm * c..(hm + 1) * c];
                let mut acc = czero::<T>();
                for (z, &f) in row.iter().zip(p) {
                    acc += z * f;
                }
                *dst = acc;
            }
        }
        Ok(self.push(Op::TimeModes { phi, a }, &[phi, a], Value::Complex(out)))
    }

    /// Clamps real entries to `[-1, 1]`.
    pub fn clamp_unit(&mut self, x: Slot) -> Result<Slot> {
        self.check(x)?;
        let out = self.real(x)?.map(|v| v.max(-T::one()).min(T::one()));
        Ok(self.push(Op::ClampUnit { x }, &[x], Value::Real(out)))
    }

    /// Projects complex entries onto the closed unit disc.
    pub fn radial_clamp(&mut self, x: Slot) -> Result<Slot> {
        self.check(x)?;
        let out = self.complex(x)?.map(|z| {
            let r = z.norm();
            if r > T::one() {
                z / r
            } else {
                z
            }
        });
        Ok(self.push(Op::RadialClamp { x }, &[x], Value::Complex(out)))
    }

    /// Appends `pad` zeros to the last axis.
    pub fn pad(&mut self, x: Slot, pad: usize) -> Result<Slot> {
        self.check(x)?;
        let xv = self.real(x)?;
        if xv.rank() == 0 {
            return Err(Error::shape("pad: scalar input"));
        }
        let n = xv.last_dim();
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = n + pad;
        let mut out = Tensor::zeros(&shape);
        for (src, dst) in xv.data().chunks_exact(n.max(1)).zip(out.data_mut().chunks_exact_mut(n + pad)) {
            dst[..n].copy_from_slice(src);
        }
        Ok(self.push(Op::Pad { x, pad }, &[x], Value::Real(out)))
    }

    /// Keeps the first `n` entries of the last axis.
    pub fn crop(&mut self, x: Slot, n: usize) -> Result<Slot> {
        self.check(x)?;
        let xv = self.real(x)?;
        let full = xv.last_dim();
        if xv.rank() == 0 || n > full || n == 0 {
            return Err(Error::shape(format!("crop: cannot keep {n} of {full}")));
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let mut out = Tensor::zeros(&shape);
        for (src, dst) in xv.data().chunks_exact(full).zip(out.data_mut().chunks_exact_mut(n)) {
            dst.copy_from_slice(&src[..n]);
        }
        Ok(self.push(Op::Crop { x, n }, &[x], Value::Real(out)))
    }

    pub fn sum(&mut self, x: Slot) -> Result<Slot> {
        self.check(x)?;
        let s = self.real(x)?.sum();
        Ok(self.push(Op::Sum { x }, &[x], Value::Real(Tensor::scalar(s))))
    }

    pub fn sum_squares(&mut self, x: Slot) -> Result<Slot> {
        self.check(x)?;
        let s = match self.value(x) {
            Value::Real(t) => t.data().iter().map(|&v| v * v).sum(),
            Value::Complex(z) => z.data().iter().map(|v| v.norm_sqr()).sum(),
        };
        Ok(self.push(Op::SumSquares { x }, &[x], Value::Real(Tensor::scalar(s))))
    }

    /// `sum((pred - target)^2) / denom` against a constant target.
    pub fn mse_against(&mut self, pred: Slot, target: &Tensor<T>, denom: T) -> Result<Slot> {
        self.check(pred)?;
        let p = self.real(pred)?;
        p.check_same_shape(target)?;
        let s: T = p.data().iter().zip(target.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let op = Op::Mse { pred, target: target.clone(), denom };
        Ok(self.push(op, &[pred], Value::Real(Tensor::scalar(s / denom))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_identity_matmul() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let y = tape.constant(Tensor::from_vec(vec![3.0, 4.0]));
        let z = tape.record(OpKind::Add, &[x, y]).unwrap();
        assert_eq!(tape.real(z).unwrap().data(), &[4.0, 6.0]);

        let eye = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let w = tape.record(OpKind::MatMul, &[eye, x]).unwrap();
        assert_eq!(tape.real(w).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn dft_round_trip_on_tape() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..32).map(|i| ((i * 7 % 13) as f64 - 6.0) / 3.0).collect();
        let x = tape.constant(Tensor::new(vec![2, 16], data.clone()).unwrap());
        let s = tape.record(OpKind::Dft, &[x]).unwrap();
        let y = tape.record(OpKind::Idft(16), &[s]).unwrap();
        for (a, b) in tape.real(y).unwrap().data().iter().zip(&data) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let y = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        assert!(matches!(tape.add(x, y), Err(Error::Shape(_))));
        let w = tape.constant(Tensor::zeros(&[3, 3]));
        assert!(tape.matmul(w, x).is_err());
        assert!(tape.record(OpKind::Add, &[x]).is_err());
        assert!(tape.add(x, Slot(99)).is_err());
    }

    #[test]
    fn broadcast_channel_scale() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let s = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.5, -1.0, 2.0]).unwrap());
        let y = tape.channel_scale(x, s).unwrap();
        assert_eq!(tape.real(y).unwrap().shape(), &[2, 2, 3]);
        assert_eq!(tape.real(y).unwrap().data(), &[1.0, 2.0, 3.0, 2.0, 2.5, 3.0, -1.0, -2.0, -3.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn spectral_mix_truncates_high_modes() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Spectrum::from_fn(&[1, 1, 5], |i| Complex::new(1.0 + i as f64, 0.5)));
        let r = tape.constant(Spectrum::from_fn(&[2, 1, 1], |_| Complex::new(0.0, 1.0)));
        let y = tape.spectral_mix(x, r).unwrap();
        let out = tape.complex(y).unwrap().data();
        assert_eq!(out[0], Complex::new(-0.5, 1.0));
        assert_eq!(out[1], Complex::new(-0.5, 2.0));
        assert!(out[2..].iter().all(|z| *z == Complex::new(0.0, 0.0)));
    }
}
