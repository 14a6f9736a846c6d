use cgq_core::adjoint::{default_factor_rule, solve_dual, stability_factors, testing_basis, DualConfig};
use cgq_core::numerics::{BigFloat, Matrix, PrecisionContext, Real, Vector};
use cgq_core::primal::{solve_cg, SolverConfig};
use cgq_core::problems::{FnProblem, LinearProblem, Problem};
use cgq_core::residual::{default_rule, discrete_residual};
use proptest::prelude::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::new(40).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // u' = k t^{k-1} has polynomial solution t^k; cG(q) reproduces it for k <= q.
    #[test]
    fn polynomial_solutions_are_exact(q in 1usize..=4, k in 1usize..=4, steps in 1usize..=6) {
        prop_assume!(k <= q);
        let c = ctx();
        let kk = k as i64;
        let prob = FnProblem::new(
            "power",
            Vector::from_f64s(&[0.0], &c),
            move |_u: &Vector<BigFloat>, t: &BigFloat| {
                let ctx = t.context();
                Vector::from_vec(vec![BigFloat::from_i64(kk, &ctx) * t.powi(kk as i32 - 1)])
            },
            |_u: &Vector<BigFloat>, t: &BigFloat| Matrix::zeros(1, 1, &t.context()),
        );
        let end = BigFloat::from_i64(2, &c);
        let dt = end.clone() / BigFloat::from_i64(steps as i64, &c);
        let traj = solve_cg(&prob, &SolverConfig::new(q, dt, &c), &end).unwrap();
        let err = (traj.final_value()[0].clone() - end.powi(kk as i32)).abs();
        prop_assert!(err < BigFloat::from_f64(1e-30, &c), "{}", err);
    }

    // Running stability profiles integrate non-negative quantities.
    #[test]
    fn running_profiles_are_monotone(a in -1.5f64..1.5, b in -1.5f64..1.5, q in 1usize..=3) {
        let c = ctx();
        let lin = LinearProblem::new(
            Matrix::from_f64_rows(&[&[a, 1.0], &[-1.0, b]], &c).unwrap(),
            Vector::from_f64s(&[1.0, 0.0], &c),
            "rot",
        ).unwrap();
        let traj = solve_cg(&lin, &SolverConfig::new(q, BigFloat::from_f64(0.125, &c), &c), &BigFloat::one(&c)).unwrap();
        let dcfg = DualConfig::for_testing_degree(q - 1);
        let dual = solve_dual(&traj, &lin, &Vector::from_f64s(&[0.0, 1.0], &c), &dcfg).unwrap();
        let basis = testing_basis(q - 1, &c).unwrap();
        let sf = stability_factors(&dual, &basis, &default_factor_rule(dcfg.degree, &c).unwrap()).unwrap();
        for w in sf.profile.windows(2) {
            prop_assert!(w[0].s_g <= w[1].s_g && w[0].s_c <= w[1].s_c && w[0].s_c2 <= w[1].s_c2);
        }
        // Cauchy-Schwarz on [0, 1]: ∫‖πz‖ ≤ (∫‖πz‖²)^{1/2}.
        prop_assert!(sf.s_c <= sf.s_c2.clone() * (BigFloat::one(&c) + BigFloat::from_f64(1e-30, &c)));
    }

    // Galerkin orthogonality holds whatever the linear system.
    #[test]
    fn discrete_residual_is_tiny(a in -2.0f64..2.0, b in -2.0f64..2.0, q in 1usize..=3) {
        let c = ctx();
        let lin = LinearProblem::new(
            Matrix::from_f64_rows(&[&[a, b], &[-b, a]], &c).unwrap(),
            Vector::from_f64s(&[1.0, -1.0], &c),
            "spiral",
        ).unwrap();
        let cfg = SolverConfig::new(q, BigFloat::from_f64(0.1, &c), &c);
        let traj = solve_cg(&lin, &cfg, &BigFloat::one(&c)).unwrap();
        let basis = testing_basis(q - 1, &c).unwrap();
        let res = discrete_residual(&traj, &lin, &basis, &default_rule(q, q - 1, &c).unwrap()).unwrap();
        prop_assert!(res.max_discrete() <= cfg.tol.clone() * BigFloat::from_i64(100, &c));
        prop_assert!(lin.exact(&BigFloat::one(&c)).is_some());
    }
}
