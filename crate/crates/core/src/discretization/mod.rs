//! Time partitions, nodal bases, quadrature and piecewise interpolation.

mod basis;
mod partition;
mod piecewise;
mod poly;
mod quadrature;

pub use basis::{lagrange_basis, shifted_legendre, BasisSpec, NodeFamily};
pub use partition::Partition;
pub(crate) use piecewise::combine;
pub use piecewise::{interpolate_pi, PiecewisePolynomial};
pub use poly::Poly;
pub use quadrature::{integrate, QuadratureRule};
