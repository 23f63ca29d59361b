//! Dense `f64` tensors with a define-by-run gradient tape.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles. Calling
//! [`Tape::backward`] consumes the tape and returns the gradient of a scalar
//! loss with respect to every leaf created with [`Tape::param`].

mod adam;
pub mod gradcheck;
mod params;
mod sparse;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
