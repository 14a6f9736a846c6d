//! Error representation, the data/Galerkin/computational bound split, and
//! step-size and horizon predictions.

use rayon::prelude::*;
use serde::Serialize;

use crate::adjoint::{short, DualSolution, FactorSummary, StabilityFactors};
use crate::discretization::{BasisSpec, Partition, QuadratureRule};
use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real, Vector};
use crate::primal::Trajectory;
use crate::problems::Problem;
use crate::residual::{local_residual, ResidualData};

fn check_horizon<R: Real>(traj: &Trajectory<R>, dual: &DualSolution<R>) -> Result<()> {
    let (a, b) = (traj.partition(), dual.partition());
    if a.start() != b.start() || a.end() != b.end() {
        return Err(Error::Horizon(format!(
            "trajectory covers [{}, {}] but the dual covers [{}, {}]",
            short(a.start()),
            short(a.end()),
            short(b.start()),
            short(b.end())
        )));
    }
    Ok(())
}

/// `z` at local coordinate `s` of primal interval `m`.
fn dual_at<R: Real>(dual: &DualSolution<R>, part: &Partition<R>, m: usize, s: &R) -> Result<Vector<R>> {
    if dual.partition().nodes() == part.nodes() {
        Ok(dual.z.eval_local(m, s))
    } else {
        dual.evaluate(&part.global(m, s))
    }
}

/// `z(t_{m-1} + τ_k Δt_m)` for every interval and testing node.
pub fn dual_at_testing_nodes<R: Real>(
    dual: &DualSolution<R>,
    part: &Partition<R>,
    basis: &BasisSpec<R>,
) -> Result<Vec<Vec<Vector<R>>>> {
    (0..part.len())
        .into_par_iter()
        .map(|m| basis.nodes().iter().map(|tau| dual_at(dual, part, m, tau)).collect())
        .collect()
}

/// Terms of the error representation
/// `⟨z_T, e(T)⟩ = ⟨z(0), e(0)⟩ + Σ ⟨z(t_{m-1}), [U]_{m-1}⟩ + ∫ ⟨z, R⟩ dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation<R> {
    pub data: R,
    pub jumps: R,
    pub residual: R,
}

impl<R: Real> Representation<R> {
    pub fn total(&self) -> R {
        self.data.clone() + &self.jumps + &self.residual
    }
}

/// Evaluates the error representation. `exact_initial` is `u(0)`; without it
/// the data term is zero.
pub fn error_representation<R: Real>(
    traj: &Trajectory<R>,
    dual: &DualSolution<R>,
    problem: &dyn Problem<R>,
    rule: &QuadratureRule<R>,
    exact_initial: Option<&Vector<R>>,
) -> Result<Representation<R>> {
    check_horizon(traj, dual)?;
    let part = traj.partition();
    let ctx = *traj.ctx();
    let data = match exact_initial {
        Some(u0) => dual.initial_value().dot(&(&traj.initial_value() - u0)),
        None => R::zero(&ctx),
    };
    let terms = (0..part.len())
        .into_par_iter()
        .map(|m| -> Result<(R, R)> {
            let h = part.width(m);
            let zero = R::zero(&ctx);
            let jump = dual_at(dual, part, m, &zero)?.dot(&traj.jump(m));
            let mut acc = R::zero(&ctx);
            for (s, w) in rule.points().iter().zip(rule.weights()) {
                let z = dual_at(dual, part, m, s)?;
                acc += z.dot(&local_residual(traj, problem, m, s)) * w;
            }
            Ok((jump, acc * &h))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut jumps, mut residual) = (R::zero(&ctx), R::zero(&ctx));
    for (j, r) in terms {
        jumps += j;
        residual += r;
    }
    Ok(Representation { data, jumps, residual })
}

/// Bounds on the three error contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBreakdown<R> {
    /// `S_D ‖U(0) - u(0)‖`.
    pub e_d: R,
    /// `Σ ‖z(t_{m-1}) - πz(t_{m-1}^+)‖ ‖[U]‖ + ∫ ‖z - πz‖ ‖R‖`.
    pub e_g: R,
    /// `S_G max Δt^{p+1} (‖[U]‖/Δt + ‖R‖)`, with the interpolation constant taken as 1.
    pub e_g_modulo_cp: R,
    /// `Σ_m Σ_k ‖z(t_{m-1} + τ_k Δt_m)‖ ‖R̄_k^m‖`.
    pub e_c: R,
    /// The same nodal sum with every `‖R̄‖` replaced by `ε √N`, scaled by `Δt_m / min Δt`.
    pub e_c_ceiling: R,
    /// `S_C ε √N / min Δt`.
    pub e_c_ceiling_modulo_cp: R,
    /// `ε (Σ_m Σ_k ‖z(t_{m-1} + τ_k Δt_m)‖²)^{1/2}`, the RMS under the random sign model.
    pub e_c_rms: R,
    /// `S_C2 ε / √(min Δt)`.
    pub e_c_rms_modulo_cp: R,
    pub e_q: Option<R>,
    pub factors: StabilityFactors<R>,
    pub galerkin_summary: R,
    pub max_scaled_discrete: R,
    pub data_error: R,
    pub eps: R,
    pub dim: usize,
    pub min_dt: R,
}

impl<R: Real> ErrorBreakdown<R> {
    /// `E_D + E_G + E_C (+ E_Q)`.
    pub fn total(&self) -> R {
        let mut t = self.e_d.clone() + &self.e_g + &self.e_c;
        if let Some(q) = &self.e_q {
            t += q.clone();
        }
        t
    }

    pub fn report(&self) -> BreakdownReport {
        let full = |x: &R| x.to_decimal();
        BreakdownReport {
            e_d: full(&self.e_d),
            e_g: full(&self.e_g),
            e_g_modulo_cp: full(&self.e_g_modulo_cp),
            e_c: full(&self.e_c),
            e_c_ceiling: full(&self.e_c_ceiling),
            e_c_ceiling_modulo_cp: full(&self.e_c_ceiling_modulo_cp),
            e_c_rms: full(&self.e_c_rms),
            e_c_rms_modulo_cp: full(&self.e_c_rms_modulo_cp),
            e_q: self.e_q.as_ref().map(full),
            total: full(&self.total()),
            factors: self.factors.summary(),
            galerkin_summary: full(&self.galerkin_summary),
            max_scaled_discrete: full(&self.max_scaled_discrete),
            data_error: full(&self.data_error),
            dim: self.dim,
            min_dt: full(&self.min_dt),
        }
    }
}

/// Serializable form of [`ErrorBreakdown`], decimal strings at working precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub e_d: String,
    pub e_g: String,
    pub e_g_modulo_cp: String,
    pub e_c: String,
    pub e_c_ceiling: String,
    pub e_c_ceiling_modulo_cp: String,
    pub e_c_rms: String,
    pub e_c_rms_modulo_cp: String,
    pub e_q: Option<String>,
    pub total: String,
    pub factors: FactorSummary,
    pub galerkin_summary: String,
    pub max_scaled_discrete: String,
    pub data_error: String,
    pub dim: usize,
    pub min_dt: String,
}

/// Everything [`assemble_bounds`] reads.
pub struct BoundInputs<'a, R> {
    pub traj: &'a Trajectory<R>,
    pub problem: &'a dyn Problem<R>,
    pub dual: &'a DualSolution<R>,
    pub residual: &'a ResidualData<R>,
    pub factors: &'a StabilityFactors<R>,
    /// `‖U(0) - u(0)‖`.
    pub data_error: R,
    /// Rule for `∫ ‖z - πz‖ ‖R‖` on each interval.
    pub rule: &'a QuadratureRule<R>,
    pub e_q: Option<R>,
}

pub fn assemble_bounds<R: Real>(inputs: &BoundInputs<'_, R>) -> Result<ErrorBreakdown<R>> {
    let BoundInputs { traj, problem, dual, residual, factors, rule, .. } = inputs;
    let p = residual.degree();
    if factors.p != p {
        return Err(Error::Config(format!("residual data uses p = {p} but stability factors use p = {}", factors.p)));
    }
    check_horizon(traj, dual)?;
    let part = traj.partition();
    if residual.intervals.len() != part.len() {
        return Err(Error::Dimension { expected: part.len(), found: residual.intervals.len() });
    }
    let ctx = *traj.ctx();
    let basis = &residual.basis;
    let eps: R = ctx.eps();
    let n = traj.dim();
    let root_n = R::from_i64(n as i64, &ctx).sqrt();
    let min_dt = part.min_width();
    let nodal = dual_at_testing_nodes(dual, part, basis)?;
    let test_at: Vec<Vec<R>> = rule.points().iter().map(|s| basis.values(s)).collect();
    let zero = R::zero(&ctx);

    // Per interval: (galerkin, computational, ceiling weight, squared weight).
    let per = (0..part.len())
        .into_par_iter()
        .map(|m| -> Result<(R, R, R, R)> {
            let h = part.width(m);
            let zs = &nodal[m];
            let res = &residual.intervals[m];
            let pz0 = crate::discretization::combine(zs, &basis.values_at_zero());
            let mut g = (&dual_at(dual, part, m, &zero)? - &pz0).norm() * &res.jump.norm();
            for (l, (s, w)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let z = dual_at(dual, part, m, s)?;
                let pz = crate::discretization::combine(zs, &test_at[l]);
                let r = local_residual(traj, *problem, m, s).norm();
                g += (&z - &pz).norm() * &r * w * &h;
            }
            let mut c = R::zero(&ctx);
            let mut weight = R::zero(&ctx);
            let mut sq = R::zero(&ctx);
            for (z, rbar) in zs.iter().zip(&res.discrete) {
                let zn = z.norm();
                c += zn.clone() * &rbar.norm();
                sq += zn.clone() * &zn;
                weight += zn;
            }
            Ok((g, c, weight * &h, sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut e_g, mut e_c, mut weight, mut sq) = (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    for (g, c, w, s) in per {
        e_g += g;
        e_c += c;
        weight += w;
        sq += s;
    }
    let galerkin_summary = residual.galerkin_summary();
    Ok(ErrorBreakdown {
        e_d: factors.s_d.clone() * &inputs.data_error,
        e_g,
        e_g_modulo_cp: factors.s_g.clone() * &galerkin_summary,
        e_c,
        e_c_ceiling: weight * &eps * &root_n / &min_dt,
        e_c_ceiling_modulo_cp: factors.s_c.clone() * &eps * &root_n / &min_dt,
        e_c_rms: sq.sqrt() * &eps,
        e_c_rms_modulo_cp: factors.s_c2.clone() * &eps / &min_dt.sqrt(),
        e_q: inputs.e_q.clone(),
        factors: (*factors).clone(),
        galerkin_summary,
        max_scaled_discrete: residual.max_scaled_discrete(),
        data_error: inputs.data_error.clone(),
        eps,
        dim: n,
        min_dt,
    })
}

/// Quadrature term `E_Q = S_Q max ‖πf - f‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureEstimate<R> {
    pub s_q: R,
    pub max_defect: R,
    pub bound: R,
}

/// `E_Q` with `f(U(t), t)` interpolated at the testing nodes and the defect
/// sampled at `samples` midpoints per interval.
pub fn estimate_quadrature_error<R: Real>(
    dual: &DualSolution<R>,
    problem: &dyn Problem<R>,
    traj: &Trajectory<R>,
    basis: &BasisSpec<R>,
    samples: usize,
) -> Result<QuadratureEstimate<R>> {
    check_horizon(traj, dual)?;
    let part = traj.partition();
    let ctx = *traj.ctx();
    let samples = samples.max(1);
    let pts: Vec<R> = (0..samples).map(|i| R::from_ratio(2 * i as i64 + 1, 2 * samples as i64, &ctx)).collect();
    let test_at: Vec<Vec<R>> = pts.iter().map(|s| basis.values(s)).collect();
    let f_at = |m: usize, s: &R| problem.rhs(&traj.poly().eval_local(m, s), &part.global(m, s));
    let max_defect = (0..part.len())
        .into_par_iter()
        .map(|m| {
            let fk: Vec<Vector<R>> = basis.nodes().iter().map(|tau| f_at(m, tau)).collect();
            pts.iter()
                .zip(&test_at)
                .map(|(s, lam)| (&crate::discretization::combine(&fk, lam) - &f_at(m, s)).norm())
                .reduce(R::max_of)
                .expect("samples")
        })
        .reduce_with(R::max_of)
        .expect("intervals");
    let rule = QuadratureRule::gauss_legendre(dual.degree() + 2, &ctx)?;
    let s_q = dual.z.partition().nodes().windows(2).enumerate().fold(R::zero(&ctx), |acc, (m, w)| {
        let h = w[1].clone() - &w[0];
        let int = rule
            .points()
            .iter()
            .zip(rule.weights())
            .fold(R::zero(&ctx), |a, (s, wt)| a + dual.z.eval_local(m, s).norm() * wt);
        acc + int * &h
    });
    Ok(QuadratureEstimate { bound: s_q.clone() * &max_defect, s_q, max_defect })
}

/// `ε^{1/(2q + 1/2)}`, the step that balances `Δt^{2q}` against `ε Δt^{-1/2}`.
pub fn predict_optimal_dt(q: usize, ctx: &PrecisionContext) -> Result<f64> {
    if q == 0 {
        return Err(Error::Config("optimal step needs q >= 1".into()));
    }
    Ok(10f64.powf(ctx.log10_eps() / (2.0 * q as f64 + 0.5)))
}

/// Minimiser of `k_g Δt^{2q} + k_c ε Δt^{-1/2}`:
/// `(k_c ε / (4 q k_g))^{1/(2q + 1/2)}`.
pub fn predict_optimal_dt_scaled(q: usize, ctx: &PrecisionContext, k_c: f64, k_g: f64) -> Result<f64> {
    if q == 0 || !(k_c > 0.0 && k_g > 0.0) {
        return Err(Error::Config("optimal step needs q >= 1 and positive constants".into()));
    }
    let log = ctx.log10_eps() + (k_c / (4.0 * q as f64 * k_g)).log10();
    Ok(10f64.powf(log / (2.0 * q as f64 + 0.5)))
}

/// Horizon where `S(T) ε ≈ 1` for `S(T) = 10^{rate T}`: `digits / rate`.
pub fn predict_computability(ctx: &PrecisionContext, growth_rate: f64) -> Result<f64> {
    computability_horizon(ctx.digits() as f64, growth_rate)
}

/// `n_mach / rate`.
pub fn computability_horizon(n_mach: f64, growth_rate: f64) -> Result<f64> {
    if !(growth_rate > 0.0) {
        return Err(Error::Config(format!("growth rate must be positive, got {growth_rate}")));
    }
    Ok(n_mach / growth_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{default_factor_rule, solve_dual, stability_factors, testing_basis, DualConfig};
    use crate::discretization::{lagrange_basis, NodeFamily, PiecewisePolynomial};
    use crate::numerics::{BigFloat, Matrix};
    use crate::primal::{solve_cg, SolverConfig};
    use crate::problems::{linear_test, scalar_linear, FnProblem, LinearProblem};
    use crate::residual::{default_rule, discrete_residual};

    fn bf(x: f64, c: &PrecisionContext) -> BigFloat {
        BigFloat::from_f64(x, c)
    }

    struct Pipeline {
        traj: Trajectory<BigFloat>,
        dual: DualSolution<BigFloat>,
        res: ResidualData<BigFloat>,
        sf: StabilityFactors<BigFloat>,
        rule: QuadratureRule<BigFloat>,
    }

    fn pipeline(problem: &LinearProblem<BigFloat>, q: usize, dt: f64, end: f64, zt: &[f64], c: &PrecisionContext) -> Pipeline {
        let traj = solve_cg(problem, &SolverConfig::new(q, bf(dt, c), c), &bf(end, c)).unwrap();
        let p = q - 1;
        let cfg = DualConfig::for_testing_degree(p).with_degree(10);
        let dual = solve_dual(&traj, problem, &Vector::from_f64s(zt, c), &cfg).unwrap();
        let basis = testing_basis(p, c).unwrap();
        let res = discrete_residual(&traj, problem, &basis, &default_rule(q, p, c).unwrap()).unwrap();
        let sf = stability_factors(&dual, &basis, &default_factor_rule(10, c).unwrap()).unwrap();
        let rule = QuadratureRule::gauss_legendre(q + 12, c).unwrap();
        Pipeline { traj, dual, res, sf, rule }
    }

    #[test]
    fn representation_matches_weighted_error() {
        let c = PrecisionContext::new(40).unwrap();
        let lin = linear_test(
            Matrix::from_f64_rows(&[&[-0.5, 1.0], &[-1.0, -0.2]], &c).unwrap(),
            Vector::from_f64s(&[1.0, 0.5], &c),
        )
        .unwrap();
        let zt = [0.3, -1.2];
        let end = BigFloat::one(&c);
        // Perturbed data: solve from u0 + δ, measure against the exact solution from u0.
        let delta = Vector::from_f64s(&[1e-3, -2e-3], &c);
        let shifted = lin.with_initial(&lin.initial() + &delta).unwrap();
        let pl = pipeline(&shifted, 2, 0.1, 1.0, &zt, &c);
        let rep = error_representation(&pl.traj, &pl.dual, &lin, &pl.rule, Some(&lin.initial())).unwrap();
        let truth = Vector::from_f64s(&zt, &c).dot(&(&pl.traj.final_value() - &lin.exact(&end).unwrap()));
        let rel = ((rep.total() - &truth) / &truth).abs();
        assert!(rel < bf(1e-20, &c), "{rel}");
    }

    #[test]
    fn one_step_decay_representation() {
        let c = PrecisionContext::new(40).unwrap();
        let p = scalar_linear(&BigFloat::from_i64(-1, &c), &BigFloat::one(&c));
        let pl = pipeline(&p, 1, 1.0, 1.0, &[1.0], &c);
        let rep = error_representation(&pl.traj, &pl.dual, &p, &pl.rule, None).unwrap();
        // cG(1) one step: U(1) = 1/3.
        let truth = BigFloat::from_ratio(1, 3, &c) - BigFloat::from_i64(-1, &c).exp();
        assert!(((rep.total() - &truth) / &truth).abs() < bf(1e-9, &c));
        assert!(rep.data.is_zero() && rep.jumps.is_zero());
    }

    #[test]
    fn exact_trajectory_has_zero_representation_and_bounds() {
        let c = PrecisionContext::new(30).unwrap();
        // u' = 1: cG(1) is exact.
        let prob = FnProblem::new(
            "ramp",
            Vector::from_f64s(&[0.0], &c),
            |_u: &Vector<BigFloat>, t: &BigFloat| Vector::from_vec(vec![BigFloat::one(&t.context())]),
            |_u: &Vector<BigFloat>, t: &BigFloat| Matrix::zeros(1, 1, &t.context()),
        );
        let traj = solve_cg(&prob, &SolverConfig::new(1, bf(0.25, &c), &c), &BigFloat::one(&c)).unwrap();
        let dual = solve_dual(&traj, &prob, &Vector::from_f64s(&[1.0], &c), &DualConfig::for_testing_degree(0)).unwrap();
        let basis = testing_basis(0, &c).unwrap();
        let rule = QuadratureRule::gauss_legendre(4, &c).unwrap();
        let rep = error_representation(&traj, &dual, &prob, &rule, Some(&Vector::from_f64s(&[0.0], &c))).unwrap();
        assert!(rep.total().is_zero());
        let res = discrete_residual(&traj, &prob, &basis, &default_rule(1, 0, &c).unwrap()).unwrap();
        let sf = stability_factors(&dual, &basis, &default_factor_rule(3, &c).unwrap()).unwrap();
        let b = assemble_bounds(&BoundInputs {
            traj: &traj,
            problem: &prob,
            dual: &dual,
            residual: &res,
            factors: &sf,
            data_error: BigFloat::zero(&c),
            rule: &rule,
            e_q: None,
        })
        .unwrap();
        assert!(b.total().is_zero(), "{}", b.total());
        assert!(b.e_g_modulo_cp.is_zero());
    }

    #[test]
    fn bounds_dominate_true_error_on_linear_problem() {
        let c = PrecisionContext::new(40).unwrap();
        let lin = linear_test(
            Matrix::from_f64_rows(&[&[0.1, 1.0, 0.0], &[-1.0, 0.0, 0.3], &[0.2, -0.5, -0.4]], &c).unwrap(),
            Vector::from_f64s(&[1.0, -0.5, 0.25], &c),
        )
        .unwrap();
        let end = BigFloat::one(&c);
        for q in 1..=3 {
            let pl = pipeline(&lin, q, 0.1, 1.0, &[1.0, 0.0, 0.0], &c);
            let b = assemble_bounds(&BoundInputs {
                traj: &pl.traj,
                problem: &lin,
                dual: &pl.dual,
                residual: &pl.res,
                factors: &pl.sf,
                data_error: BigFloat::zero(&c),
                rule: &pl.rule,
                e_q: None,
            })
            .unwrap();
            let err = (&pl.traj.final_value() - &lin.exact(&end).unwrap())[0].clone().abs();
            assert!(err <= b.total(), "q={q}: {err} > {}", b.total());
            assert!(b.e_c_rms <= b.e_c_ceiling);
            assert!(b.e_c <= b.e_c_ceiling.clone() * BigFloat::from_i64(10, &c));
            let rep = b.report();
            assert!(serde_json::to_string(&rep).unwrap().contains("e_c_rms"));
        }
    }

    #[test]
    fn ceiling_plug_in_example() {
        // ε = 1e-16, N = 3, min Δt = 1e-3, unit dual weight per unit time on [0, 1].
        let ceiling: f64 = 1e-16 * 3f64.sqrt() / 1e-3;
        assert!((ceiling - 1.7320508e-13).abs() < 1e-19);
        let c = PrecisionContext::ieee_double();
        let zero = scalar_linear(&0.0, &1.0);
        let traj = solve_cg(&zero, &SolverConfig::new(1, 1e-3, &c), &1.0).unwrap();
        let dual = solve_dual(&traj, &zero, &Vector::from_vec(vec![1.0]), &DualConfig::for_testing_degree(0)).unwrap();
        let basis = testing_basis(0, &c).unwrap();
        let res = discrete_residual(&traj, &zero, &basis, &default_rule(1, 0, &c).unwrap()).unwrap();
        let sf = stability_factors(&dual, &basis, &default_factor_rule(3, &c).unwrap()).unwrap();
        let rule = QuadratureRule::gauss_legendre(3, &c).unwrap();
        let b = assemble_bounds(&BoundInputs {
            traj: &traj,
            problem: &zero,
            dual: &dual,
            residual: &res,
            factors: &sf,
            data_error: 0.0,
            rule: &rule,
            e_q: None,
        })
        .unwrap();
        let eps = 2f64.powi(-53);
        assert!((b.e_c_ceiling_modulo_cp.clone() - eps / 1e-3).abs() < 1e-6 * eps / 1e-3);
        assert!((b.e_c_ceiling.clone() - eps / 1e-3).abs() < 1e-6 * eps / 1e-3);
        assert!((b.e_c_rms_modulo_cp.clone() - eps / 1e-3f64.sqrt()).abs() < 1e-6 * eps / 1e-3f64.sqrt());
        assert!((b.e_c_rms - eps * 1e3f64.sqrt()).abs() < 1e-6 * eps * 1e3f64.sqrt());
    }

    #[test]
    fn mismatched_inputs_error() {
        let c = PrecisionContext::ieee_double();
        let p = scalar_linear(&-1.0, &1.0);
        let t1 = solve_cg(&p, &SolverConfig::new(2, 0.1, &c), &1.0).unwrap();
        let t2 = solve_cg(&p, &SolverConfig::new(2, 0.1, &c), &2.0).unwrap();
        let d2 = solve_dual(&t2, &p, &Vector::from_vec(vec![1.0]), &DualConfig::for_testing_degree(1)).unwrap();
        let rule = QuadratureRule::gauss_legendre(4, &c).unwrap();
        assert!(matches!(error_representation(&t1, &d2, &p, &rule, None), Err(Error::Horizon(_))));
        let d1 = solve_dual(&t1, &p, &Vector::from_vec(vec![1.0]), &DualConfig::for_testing_degree(1)).unwrap();
        let b1 = testing_basis(1, &c).unwrap();
        let res = discrete_residual(&t1, &p, &b1, &default_rule(2, 1, &c).unwrap()).unwrap();
        let sf0 = stability_factors(&d1, &testing_basis(0, &c).unwrap(), &rule).unwrap();
        let inputs = BoundInputs {
            traj: &t1,
            problem: &p,
            dual: &d1,
            residual: &res,
            factors: &sf0,
            data_error: 0.0,
            rule: &rule,
            e_q: None,
        };
        assert!(matches!(assemble_bounds(&inputs), Err(Error::Config(_))));
    }

    fn constant_dual(c: &PrecisionContext) -> DualSolution<f64> {
        let part = Partition::from_nodes(vec![0.0, 1.0]).unwrap();
        let basis = lagrange_basis(3, NodeFamily::Lobatto, c).unwrap();
        let one = Vector::from_vec(vec![1.0]);
        DualSolution {
            z: PiecewisePolynomial::new(part, basis, vec![vec![one.clone(); 4]]).unwrap(),
            z_end: one,
            policy: "given".into(),
        }
    }

    #[test]
    fn quadrature_term_matches_dense_sampling() {
        let c = PrecisionContext::ieee_double();
        for p in 0..=3usize {
            let f = FnProblem::new(
                "power",
                Vector::from_vec(vec![0.0]),
                move |_u: &Vector<f64>, t: &f64| Vector::from_vec(vec![t.powi(p as i32 + 1)]),
                |_u: &Vector<f64>, _t: &f64| Matrix::from_rows(vec![vec![0.0]]).unwrap(),
            );
            let part = Partition::from_nodes(vec![0.0, 1.0]).unwrap();
            let b1 = lagrange_basis(1, NodeFamily::Lobatto, &c).unwrap();
            let traj = Trajectory::from_nodal(part, b1, vec![vec![Vector::from_vec(vec![0.0]); 2]], "U", &c).unwrap();
            let basis = testing_basis(p, &c).unwrap();
            let est = estimate_quadrature_error(&constant_dual(&c), &f, &traj, &basis, 10_000).unwrap();
            let dense = (0..10_000)
                .map(|i| {
                    let s = (i as f64 + 0.5) / 1e4;
                    let interp: f64 =
                        basis.nodes().iter().zip(basis.values(&s)).map(|(tau, l)| tau.powi(p as i32 + 1) * l).sum();
                    (interp - s.powi(p as i32 + 1)).abs()
                })
                .fold(0.0, f64::max);
            assert!((est.s_q - 1.0).abs() < 1e-14);
            assert!((est.bound - dense).abs() < 1e-12, "p={p}: {} vs {dense}", est.bound);
            assert!(est.bound > 0.0);
        }
        // f of degree ≤ p in t along U: no defect.
        let lin = FnProblem::new(
            "line",
            Vector::from_vec(vec![0.0]),
            |_u: &Vector<f64>, t: &f64| Vector::from_vec(vec![2.0 * t - 1.0]),
            |_u: &Vector<f64>, _t: &f64| Matrix::from_rows(vec![vec![0.0]]).unwrap(),
        );
        let traj = solve_cg(&lin, &SolverConfig::new(2, 0.25, &c), &1.0).unwrap();
        let dual = solve_dual(&traj, &lin, &Vector::from_vec(vec![1.0]), &DualConfig::for_testing_degree(1)).unwrap();
        let est = estimate_quadrature_error(&dual, &lin, &traj, &testing_basis(1, &c).unwrap(), 16).unwrap();
        assert!(est.bound < 1e-14);
    }

    #[test]
    fn predictions() {
        let c = PrecisionContext::ieee_double();
        let eps16 = PrecisionContext::new(16).unwrap();
        assert!((predict_optimal_dt(1, &c).unwrap().log10() - c.log10_eps() / 2.5).abs() < 1e-12);
        // With ε = 1e-16 exactly the exponents are -6.4 and -16/10.5.
        let lg = |q: usize| -16.0 / (2.0 * q as f64 + 0.5);
        assert!((lg(1) + 6.4).abs() < 1e-12);
        assert!((lg(5) + 1.5238).abs() < 1e-4);
        let coarse = PrecisionContext::with_bits(2).unwrap();
        assert!(predict_optimal_dt(3, &coarse).unwrap() > 0.8);
        assert!(predict_optimal_dt(0, &c).is_err());
        let k = predict_optimal_dt_scaled(1, &c, 1.0, 0.25).unwrap();
        assert!((k - predict_optimal_dt(1, &c).unwrap()).abs() < 1e-18);

        assert_eq!(predict_computability(&eps16, 0.4).unwrap(), 40.0);
        assert_eq!(predict_computability(&PrecisionContext::new(400).unwrap(), 0.4).unwrap(), 1000.0);
        assert!((computability_horizon(16.0, 0.388).unwrap() - 41.237).abs() < 1e-3);
        assert!(predict_computability(&c, 0.0).is_err());
        assert!(predict_computability(&c, -1.0).is_err());
    }
}
