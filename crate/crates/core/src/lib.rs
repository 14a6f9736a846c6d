//! Continuous Galerkin time stepping at arbitrary precision, with
//! dual-weighted a posteriori error bounds that separate data,
//! discretisation and round-off contributions.
//!
//! Every numeric routine is generic over [`numerics::Real`], implemented for
//! `f32`, `f64` and the MPFR-backed [`numerics::BigFloat`]. The aliases below
//! name the two instantiations the experiments use.

pub mod adjoint;
pub mod discretization;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fit;
pub mod numerics;
pub mod primal;
pub mod problems;
pub mod residual;
pub mod stochastic;

pub use error::{Error, Result};

/// Arbitrary-precision scalar.
pub type Scalar = numerics::BigFloat;
/// Arbitrary-precision state vector.
pub type State = numerics::Vector<Scalar>;
/// Arbitrary-precision trajectory.
pub type MpTrajectory = primal::Trajectory<Scalar>;
/// Native binary64 trajectory.
pub type Trajectory64 = primal::Trajectory<f64>;
/// Arbitrary-precision dual solution.
pub type MpDual = adjoint::DualSolution<Scalar>;
/// Arbitrary-precision error breakdown.
pub type MpBreakdown = estimator::ErrorBreakdown<Scalar>;
/// Native binary64 error breakdown.
pub type Breakdown64 = estimator::ErrorBreakdown<f64>;
