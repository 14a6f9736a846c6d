//! Backward dual problem `-z' = Āᵀ z`, `z(T) = z_T`, and stability factors.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{lagrange_basis, BasisSpec, NodeFamily, Partition, PiecewisePolynomial, QuadratureRule};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, PrecisionContext, Real, Vector};
use crate::primal::{CgScheme, Trajectory};
use crate::problems::Problem;

/// How the averaged Jacobian `Ā(t)` is approximated.
#[derive(Debug, Clone, Copy)]
pub enum JacobianPolicy<'a, R> {
    /// `∂f/∂u(U(t), t)`.
    AlongU,
    /// Gauss average of `∂f/∂u(sU + (1-s)u_ref, t)` over `s ∈ [0, 1]`.
    SegmentQuadrature { reference: Option<&'a Trajectory<R>>, points: usize },
}

impl<R> fmt::Display for JacobianPolicy<'_, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JacobianPolicy::AlongU => f.write_str("along_U"),
            JacobianPolicy::SegmentQuadrature { points, .. } => write!(f, "segment_quadrature({points})"),
        }
    }
}

/// `Ā(t)` under `policy`.
pub fn averaged_jacobian<R: Real>(
    traj: &Trajectory<R>,
    problem: &dyn Problem<R>,
    t: &R,
    policy: &JacobianPolicy<'_, R>,
) -> Result<Matrix<R>> {
    let u = traj.evaluate(t)?;
    averaged_at(&u, problem, t, policy)
}

fn averaged_at<R: Real>(
    u: &Vector<R>,
    problem: &dyn Problem<R>,
    t: &R,
    policy: &JacobianPolicy<'_, R>,
) -> Result<Matrix<R>> {
    match policy {
        JacobianPolicy::AlongU => Ok(problem.jacobian(u, t)),
        JacobianPolicy::SegmentQuadrature { reference, points } => {
            let reference = reference
                .ok_or_else(|| Error::Config("segment quadrature needs a reference trajectory".into()))?;
            let v = reference.evaluate(t)?;
            let ctx = t.context();
            let rule = QuadratureRule::<R>::gauss_legendre(*points, &ctx)?;
            let mut acc: Option<Matrix<R>> = None;
            for (s, w) in rule.points().iter().zip(rule.weights()) {
                // s U + (1 - s) u_ref = u_ref + s (U - u_ref)
                let mut x = v.clone();
                x.axpy(s, &(u - &v));
                let j = problem.jacobian(&x, t).scaled(w);
                acc = Some(match acc {
                    None => j,
                    Some(a) => a.add(&j),
                });
            }
            Ok(acc.expect("rule has points"))
        }
    }
}

/// Settings for the dual solve.
#[derive(Debug, Clone, Copy)]
pub struct DualConfig<'a, R> {
    /// Degree of the cG scheme used backward in time.
    pub degree: usize,
    pub quadrature_points: usize,
    pub policy: JacobianPolicy<'a, R>,
    /// Each primal interval is split into this many dual intervals.
    pub refine: usize,
}

impl<'a, R> DualConfig<'a, R> {
    /// Defaults for testing degree `p`: degree `max(p + 2, 3)`, along-`U` Jacobians.
    pub fn for_testing_degree(p: usize) -> Self {
        let degree = (p + 2).max(3);
        Self { degree, quadrature_points: degree + 2, policy: JacobianPolicy::AlongU, refine: 1 }
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self.quadrature_points = degree + 2;
        self
    }

    pub fn with_policy(mut self, policy: JacobianPolicy<'a, R>) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_refine(mut self, refine: usize) -> Self {
        self.refine = refine.max(1);
        self
    }
}

/// Numerical dual solution.
#[derive(Debug, Clone)]
pub struct DualSolution<R> {
    pub z: PiecewisePolynomial<R>,
    pub z_end: Vector<R>,
    pub policy: String,
}

impl<R: Real> DualSolution<R> {
    pub fn degree(&self) -> usize {
        self.z.degree()
    }

    pub fn partition(&self) -> &Partition<R> {
        self.z.partition()
    }

    pub fn evaluate(&self, t: &R) -> Result<Vector<R>> {
        self.z.evaluate(t)
    }

    /// `z(0)`.
    pub fn initial_value(&self) -> Vector<R> {
        self.z.right_limit(0)
    }
}

/// Per-interval linear maps from `z(t_m)` to the dual's nodal values on
/// `[t_{m-1}, t_m]`, so that duals for many terminal values cost one
/// matrix-vector product per node.
#[derive(Debug, Clone)]
pub struct DualPropagator<R> {
    partition: Partition<R>,
    basis: BasisSpec<R>,
    /// `maps[m][j]` sends `z(t_{m+1})` to the value at forward node `j`.
    maps: Vec<Vec<Matrix<R>>>,
    policy: String,
}

impl<R: Real> DualPropagator<R> {
    pub fn new(traj: &Trajectory<R>, problem: &dyn Problem<R>, config: &DualConfig<'_, R>) -> Result<Self> {
        let ctx = *traj.ctx();
        let scheme = CgScheme::<R>::new(config.degree, config.quadrature_points, &ctx)?;
        let partition = traj.partition().refine(config.refine)?;
        let q = config.degree;
        let maps = (0..partition.len())
            .into_par_iter()
            .map(|m| -> Result<Vec<Matrix<R>>> {
                let h = partition.width(m);
                let right = partition.right(m);
                // Reversed time σ = 1 - s; the system matrix is Āᵀ at t = t_m - σ Δt.
                let mats = scheme
                    .rule()
                    .points()
                    .iter()
                    .map(|sigma| {
                        let t = right.clone() - h.clone() * sigma;
                        let s = partition.local(m, &t);
                        let u = traj_value(traj, &partition, config.refine, m, &s, &t)?;
                        Ok(averaged_at(&u, problem, &t, &config.policy)?.transpose())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut rev = scheme.linear_maps(&h, &mats, m)?;
                // Lobatto nodes are symmetric: reversed node j is forward node q - j.
                rev.reverse();
                debug_assert_eq!(rev.len(), q + 1);
                Ok(rev)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { partition, basis: scheme.basis().clone(), maps, policy: config.policy.to_string() })
    }

    pub fn partition(&self) -> &Partition<R> {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Dual with `z(t_J) = z_end` on `[0, t_J]`, `J = end_index`.
    pub fn solve_to(&self, end_index: usize, z_end: &Vector<R>) -> Result<DualSolution<R>> {
        if end_index == 0 || end_index > self.partition.len() {
            return Err(Error::Horizon(format!("end index {end_index} outside 1..={}", self.partition.len())));
        }
        z_end.check_dim(self.maps[0][0].rows())?;
        let mut values = vec![Vec::new(); end_index];
        let mut right = z_end.clone();
        for m in (0..end_index).rev() {
            let vals: Vec<Vector<R>> = self.maps[m].iter().map(|h| h.mul_vec(&right)).collect();
            // The right node reproduces z(t_{m+1}) exactly so the dual stays continuous.
            let mut vals = vals;
            let last = vals.len() - 1;
            vals[last] = right.clone();
            right = vals[0].clone();
            values[m] = vals;
        }
        let partition = self.partition.truncate(end_index)?;
        Ok(DualSolution {
            z: PiecewisePolynomial::new(partition, self.basis.clone(), values)?,
            z_end: z_end.clone(),
            policy: self.policy.clone(),
        })
    }

    /// Dual on the whole horizon.
    pub fn solve(&self, z_end: &Vector<R>) -> Result<DualSolution<R>> {
        self.solve_to(self.partition.len(), z_end)
    }
}

fn traj_value<R: Real>(
    traj: &Trajectory<R>,
    dual_part: &Partition<R>,
    refine: usize,
    m: usize,
    s: &R,
    t: &R,
) -> Result<Vector<R>> {
    if refine == 1 {
        debug_assert!(dual_part.len() == traj.partition().len());
        Ok(traj.poly().eval_local(m, s))
    } else {
        traj.evaluate(t)
    }
}

/// Solves the dual backward from `z_end` at the trajectory's final time.
pub fn solve_dual<R: Real>(
    traj: &Trajectory<R>,
    problem: &dyn Problem<R>,
    z_end: &Vector<R>,
    config: &DualConfig<'_, R>,
) -> Result<DualSolution<R>> {
    DualPropagator::new(traj, problem, config)?.solve(z_end)
}

/// Default testing basis of degree `p`: Lobatto nodes, or the midpoint when `p = 0`.
pub fn testing_basis<R: Real>(p: usize, ctx: &PrecisionContext) -> Result<BasisSpec<R>> {
    let family = if p == 0 { NodeFamily::Gauss } else { NodeFamily::Lobatto };
    lagrange_basis(p, family, ctx)
}

/// Stability factors at one time, for profile output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint<R> {
    pub t: R,
    pub s_d: R,
    pub s_g: R,
    pub s_c: R,
    pub s_c2: R,
}

/// `S_D = ‖z(0)‖`, `S_G = ∫‖z^{(p+1)}‖`, `S_C = ∫‖πz‖`, `S_C2 = (∫‖πz‖²)^{1/2}`,
/// `S_Q = ∫‖z‖`, with running profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityFactors<R> {
    pub s_d: R,
    pub s_g: R,
    pub s_c: R,
    pub s_c2: R,
    pub s_q: R,
    pub p: usize,
    /// Running values at each partition node: `‖z(t)‖` and the integrals over `[0, t]`.
    pub profile: Vec<ProfilePoint<R>>,
}

/// Default rule for stability integrals of a degree-`q_dual` dual.
pub fn default_factor_rule<R: Real>(q_dual: usize, ctx: &PrecisionContext) -> Result<QuadratureRule<R>> {
    QuadratureRule::gauss_legendre(q_dual + 2, ctx)
}

pub fn stability_factors<R: Real>(
    dual: &DualSolution<R>,
    basis: &BasisSpec<R>,
    rule: &QuadratureRule<R>,
) -> Result<StabilityFactors<R>> {
    let p = basis.degree();
    if dual.degree() < p + 1 {
        return Err(Error::DegenerateDual { dual_degree: dual.degree(), order: p + 1 });
    }
    let z = &dual.z;
    let part = z.partition();
    let ctx = part.start().context();
    let test_at_pts: Vec<Vec<R>> = rule.points().iter().map(|s| basis.values(s)).collect();
    let per_interval: Vec<(R, R, R, R)> = (0..part.len())
        .into_par_iter()
        .map(|m| {
            let h = part.width(m);
            let nodal: Vec<Vector<R>> = basis.nodes().iter().map(|tau| z.eval_local(m, tau)).collect();
            let (mut g, mut c, mut c2, mut qz) = (R::zero(&ctx), R::zero(&ctx), R::zero(&ctx), R::zero(&ctx));
            for (l, (s, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let w = w.clone() * &h;
                let pz = crate::discretization::combine(&nodal, &test_at_pts[l]).norm();
                g += z.derivative_local(m, s, p + 1).norm() * &w;
                c2 += pz.clone() * &pz * &w;
                c += pz * &w;
                qz += z.eval_local(m, s).norm() * &w;
            }
            (g, c, c2, qz)
        })
        .collect();
    let zero = R::zero(&ctx);
    let mut profile = Vec::with_capacity(part.len() + 1);
    let (mut g, mut c, mut c2, mut qz) = (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    profile.push(ProfilePoint {
        t: part.start().clone(),
        s_d: z.right_limit(0).norm(),
        s_g: zero.clone(),
        s_c: zero.clone(),
        s_c2: zero.clone(),
    });
    for (m, (dg, dc, dc2, dq)) in per_interval.into_iter().enumerate() {
        g += dg;
        c += dc;
        c2 += dc2;
        qz += dq;
        profile.push(ProfilePoint {
            t: part.right(m).clone(),
            s_d: z.left_limit(m).norm(),
            s_g: g.clone(),
            s_c: c.clone(),
            s_c2: c2.sqrt(),
        });
    }
    Ok(StabilityFactors { s_d: dual.initial_value().norm(), s_g: g, s_c: c, s_c2: c2.sqrt(), s_q: qz, p, profile })
}

impl<R: Real> StabilityFactors<R> {
    /// CSV with columns `t, S_D, S_G, S_C, S_C2`, downsampled to 17 digits.
    pub fn write_profile_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,S_D,S_G,S_C,S_C2")?;
        for pt in &self.profile {
            writeln!(
                out,
                "{},{},{},{},{}",
                short(&pt.t),
                short(&pt.s_d),
                short(&pt.s_g),
                short(&pt.s_c),
                short(&pt.s_c2)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> FactorSummary {
        FactorSummary {
            s_d: short(&self.s_d),
            s_g: short(&self.s_g),
            s_c: short(&self.s_c),
            s_c2: short(&self.s_c2),
            s_q: short(&self.s_q),
            p: self.p,
        }
    }
}

/// Factors rounded to 17 significant digits for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSummary {
    pub s_d: String,
    pub s_g: String,
    pub s_c: String,
    pub s_c2: String,
    pub s_q: String,
    pub p: usize,
}

/// Decimal string with about 17 significant digits; keeps exponents that
/// overflow f64.
pub fn short<R: Real>(x: &R) -> String {
    if x.precision_bits() <= 57 {
        return x.to_decimal();
    }
    let ctx = PrecisionContext::with_bits(57).expect("valid");
    x.with_context(&ctx).to_decimal()
}

/// One point of the final-time growth curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPoint<R> {
    /// Final time of the dual.
    pub t: R,
    /// `S_C` for each unit terminal vector.
    pub components: Vec<R>,
}

impl<R: Real> GrowthPoint<R> {
    pub fn max(&self) -> R {
        self.components.iter().cloned().reduce(R::max_of).expect("nonempty")
    }
}

/// `S_C(T')` with unit terminal data `e_i`, for final times `T'` at every
/// `stride`-th node of the propagator's partition.
pub fn growth_profile<R: Real>(
    prop: &DualPropagator<R>,
    basis: &BasisSpec<R>,
    rule: &QuadratureRule<R>,
    stride: usize,
) -> Result<Vec<GrowthPoint<R>>> {
    let part = prop.partition();
    let ctx = part.start().context();
    let n = prop.maps[0][0].rows();
    let stride = stride.max(1);
    let ends: Vec<usize> = (1..=part.len()).filter(|j| j % stride == 0 || *j == part.len()).collect();
    ends.into_par_iter()
        .map(|j| {
            let components = (0..n)
                .map(|i| {
                    let dual = prop.solve_to(j, &Vector::unit(n, i, &ctx))?;
                    Ok(stability_factors(&dual, basis, rule)?.s_c)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GrowthPoint { t: part.nodes()[j].clone(), components })
        })
        .collect()
}
