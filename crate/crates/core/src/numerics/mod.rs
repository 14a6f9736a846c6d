//! Scalar substrate: precision contexts, the [`Real`] trait with its f64/f32
//! and MPFR-backed implementations, and small dense linear algebra.

mod bigfloat;
mod context;
mod matrix;
mod real;
mod vector;

pub use bigfloat::BigFloat;
pub use context::PrecisionContext;
pub use matrix::{Lu, Matrix};
pub use real::Real;
pub use vector::Vector;

/// Convenience constructor mirroring [`PrecisionContext::new`].
pub fn make_context(digits: u32) -> crate::Result<PrecisionContext> {
    PrecisionContext::new(digits)
}

/// Euclidean norm of a state vector.
pub fn norm<R: Real>(v: &Vector<R>) -> R {
    v.norm()
}
