use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{Spectrum, Tensor};

/// Contents of a tape slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Real(Tensor<T>),
    Complex(Spectrum<T>),
}

impl<T: Real> Value<T> {
    pub fn shape(&self) -> &[usize] {
        match self {
            Value::Real(t) => t.shape(),
            Value::Complex(s) => s.shape(),
        }
    }

    /// Number of real scalars (complex entries count twice).
    pub fn real_len(&self) -> usize {
        match self {
            Value::Real(t) => t.len(),
            Value::Complex(s) => 2 * s.len(),
        }
    }

    pub fn flat(&self) -> &[T] {
        match self {
            Value::Real(t) => t.data(),
            Value::Complex(s) => s.as_flat(),
        }
    }

    pub fn flat_mut(&mut self) -> &mut [T] {
        match self {
            Value::Real(t) => t.data_mut(),
            Value::Complex(s) => s.as_flat_mut(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Value::Real(t) => Value::Real(Tensor::zeros(t.shape())),
            Value::Complex(s) => Value::Complex(Spectrum::zeros(s.shape())),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, Value::Complex(_))
    }

    pub fn as_real(&self) -> Result<&Tensor<T>> {
        match self {
            Value::Real(t) => Ok(t),
            Value::Complex(_) => Err(Error::shape("expected a real tensor, found complex")),
        }
    }

    pub fn as_complex(&self) -> Result<&Spectrum<T>> {
        match self {
            Value::Complex(s) => Ok(s),
            Value::Real(_) => Err(Error::shape("expected a complex tensor, found real")),
        }
    }

    pub(crate) fn accumulate(&mut self, other: &Value<T>) {
        for (a, &b) in self.flat_mut().iter_mut().zip(other.flat()) {
            *a += b;
        }
    }
}

impl<T> From<Tensor<T>> for Value<T> {
    fn from(t: Tensor<T>) -> Self {
        Value::Real(t)
    }
}

impl<T> From<Spectrum<T>> for Value<T> {
    fn from(s: Spectrum<T>) -> Self {
        Value::Complex(s)
    }
}
