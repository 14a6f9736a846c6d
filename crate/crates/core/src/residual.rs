//! Continuous residual `R = U' - f(U, t)`, jumps, and discrete residuals
//! `R̄_k^m = λ_k(0)[U]_{m-1} + ∫ λ_k((t - t_{m-1})/Δt_m) R(t) dt`.

use std::io::Write;

use rayon::prelude::*;

use crate::discretization::{BasisSpec, QuadratureRule};
use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real, Vector};
use crate::primal::Trajectory;
use crate::problems::Problem;

/// Residual quantities of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResidual<R> {
    /// `[U]` at the left endpoint.
    pub jump: Vector<R>,
    /// `R̄_k` for each testing basis function.
    pub discrete: Vec<Vector<R>>,
    /// Largest sampled `‖R(t)‖` on the interval.
    pub max_residual: R,
}

impl<R: Real> IntervalResidual<R> {
    pub fn max_discrete(&self) -> R {
        self.discrete.iter().map(Vector::norm).reduce(R::max_of).expect("at least one basis function")
    }
}

/// Residual data of a whole trajectory.
#[derive(Debug, Clone)]
pub struct ResidualData<R> {
    pub basis: BasisSpec<R>,
    pub rule: QuadratureRule<R>,
    pub samples_per_interval: usize,
    pub nodes: Vec<R>,
    pub intervals: Vec<IntervalResidual<R>>,
}

impl<R: Real> ResidualData<R> {
    /// Testing degree `p`.
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn width(&self, m: usize) -> R {
        self.nodes[m + 1].clone() - &self.nodes[m]
    }

    /// `max_{m,k} ‖R̄_k^m‖`.
    pub fn max_discrete(&self) -> R {
        self.intervals.iter().map(IntervalResidual::max_discrete).reduce(R::max_of).expect("nonempty")
    }

    /// `max_{m,k} ‖Δt_m^{-1} R̄_k^m‖`.
    pub fn max_scaled_discrete(&self) -> R {
        (0..self.intervals.len())
            .map(|m| self.intervals[m].max_discrete() / self.width(m))
            .reduce(R::max_of)
            .expect("nonempty")
    }

    /// `max_m Δt_m^{p+1} (‖[U]_{m-1}‖ / Δt_m + max ‖R‖)`.
    pub fn galerkin_summary(&self) -> R {
        let p = self.degree() as i32;
        (0..self.intervals.len())
            .map(|m| {
                let h = self.width(m);
                let iv = &self.intervals[m];
                h.powi(p + 1) * (iv.jump.norm() / &h + &iv.max_residual)
            })
            .reduce(R::max_of)
            .expect("nonempty")
    }

    pub fn max_jump(&self) -> R {
        self.intervals.iter().map(|iv| iv.jump.norm()).reduce(R::max_of).expect("nonempty")
    }

    pub fn max_residual(&self) -> R {
        self.intervals.iter().map(|iv| iv.max_residual.clone()).reduce(R::max_of).expect("nonempty")
    }

    /// CSV with columns `m, t_m, dt_m, jump, max_rbar, max_r`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "m,t_m,dt_m,jump_norm,max_rbar,max_r")?;
        for (m, iv) in self.intervals.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m + 1,
                self.nodes[m + 1].to_decimal(),
                self.width(m).to_decimal(),
                iv.jump.norm().to_decimal(),
                iv.max_discrete().to_decimal(),
                iv.max_residual.to_decimal()
            )?;
        }
        Ok(())
    }
}

/// `U'(t) - f(U(t), t)`, using the left interval at breakpoints.
pub fn continuous_residual<R: Real>(traj: &Trajectory<R>, problem: &dyn Problem<R>, t: &R) -> Result<Vector<R>> {
    let m = traj.partition().locate(t)?;
    let s = traj.partition().local(m, t);
    Ok(local_residual(traj, problem, m, &s))
}

/// `R` at local coordinate `s` of interval `m`.
pub fn local_residual<R: Real>(traj: &Trajectory<R>, problem: &dyn Problem<R>, m: usize, s: &R) -> Vector<R> {
    let t = traj.partition().global(m, s);
    let u = traj.poly().eval_local(m, s);
    let du = traj.poly().derivative_local(m, s, 1);
    &du - &problem.rhs(&u, &t)
}

/// Default rule for the discrete residual: exact through degree `p + 2q + 3`,
/// which covers quadratic right-hand sides.
pub fn default_rule<R: Real>(q: usize, p: usize, ctx: &PrecisionContext) -> Result<QuadratureRule<R>> {
    QuadratureRule::exact_for(p + 2 * q + 3, ctx)
}

/// Jumps, discrete residuals and sampled residual maxima on every interval.
pub fn discrete_residual<R: Real>(
    traj: &Trajectory<R>,
    problem: &dyn Problem<R>,
    basis: &BasisSpec<R>,
    rule: &QuadratureRule<R>,
) -> Result<ResidualData<R>> {
    let p = basis.degree();
    let q = traj.degree();
    if rule.exactness() < p + q {
        return Err(Error::Config(format!(
            "quadrature exact to degree {} cannot integrate λ_k U' (degree {})",
            rule.exactness(),
            p + q
        )));
    }
    traj.initial_value().check_dim(problem.dim())?;
    let ctx = *traj.ctx();
    let part = traj.partition();
    let lambda0 = basis.values_at_zero();
    let tests: Vec<Vec<R>> = rule.points().iter().map(|s| basis.values(s)).collect();
    let trial = traj.basis();
    let slopes: Vec<Vec<R>> = rule.points().iter().map(|s| trial.derivatives(s, 1)).collect();
    let samples = 4 * (q + 1);
    let sample_pts: Vec<R> =
        (0..samples).map(|i| R::from_ratio(2 * i as i64 + 1, 2 * samples as i64, &ctx)).collect();

    let intervals = (0..part.len())
        .into_par_iter()
        .map(|m| {
            let h = part.width(m);
            let vals = traj.poly().interval_values(m);
            let jump = traj.jump(m);
            // ∫ λ_k R dt = Σ_l ω_l λ_k(s_l) (Σ_j (U_j - U_0) λ_j'(s_l) - Δt f(U(s_l), t_l)).
            let mut discrete: Vec<Vector<R>> = lambda0.iter().map(|c| jump.scaled(c)).collect();
            for (l, (s, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let u = traj.poly().eval_local(m, s);
                let f = problem.rhs(&u, &part.global(m, s));
                let mut r = f.scaled(&-h.clone());
                for (j, v) in vals.iter().enumerate().skip(1) {
                    r.axpy(&slopes[l][j], &(v - &vals[0]));
                }
                for (k, acc) in discrete.iter_mut().enumerate() {
                    acc.axpy(&(w.clone() * &tests[l][k]), &r);
                }
            }
            let max_residual = sample_pts
                .iter()
                .map(|s| local_residual(traj, problem, m, s).norm())
                .reduce(R::max_of)
                .expect("samples");
            IntervalResidual { jump, discrete, max_residual }
        })
        .collect();
    Ok(ResidualData {
        basis: basis.clone(),
        rule: rule.clone(),
        samples_per_interval: samples,
        nodes: part.nodes().to_vec(),
        intervals,
    })
}

/// The round-off ceiling `ε √N` on `‖R̄‖` and whether it is exceeded.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCeiling<R> {
    pub ceiling: R,
    pub measured: R,
    pub exceeded: bool,
}

pub fn residual_ceiling<R: Real>(data: &ResidualData<R>, ctx: &PrecisionContext, n: usize) -> ResidualCeiling<R> {
    let ceiling = ctx.eps::<R>() * R::from_i64(n as i64, ctx).sqrt();
    let measured = data.max_discrete();
    let exceeded = measured > ceiling;
    ResidualCeiling { ceiling, measured, exceeded }
}
