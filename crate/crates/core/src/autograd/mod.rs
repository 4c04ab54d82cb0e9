//! Reverse-mode differentiation over the operations used by the model.
//!
//! The tape records a fixed set of tensor operations (channel mixing,
//! pointwise products, half-spectrum transforms, complex mode-wise mixing and
//! modulation, activations, reductions). Complex quantities are differentiated
//! in their real parametrization: the adjoint of `z` is `dL/dRe z + i dL/dIm z`.

mod backward;
mod gradcheck;
mod tape;
mod value;

pub use backward::Gradients;
pub use gradcheck::{grad_check, GradCheckReport, GroupCheck};
pub use tape::{OpKind, Slot, Tape};
pub use value::Value;
