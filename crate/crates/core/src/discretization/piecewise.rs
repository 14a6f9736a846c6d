use crate::discretization::{BasisSpec, Partition, QuadratureRule};
use crate::error::{Error, Result};
use crate::numerics::{Real, Vector};

/// Vector-valued piecewise polynomial stored by nodal values.
///
/// Interval `m` holds the values at `t_m + τ_k Δt_m` for each basis node.
/// Evaluation at a breakpoint uses the left interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial<R> {
    partition: Partition<R>,
    basis: BasisSpec<R>,
    values: Vec<Vec<Vector<R>>>,
}

impl<R: Real> PiecewisePolynomial<R> {
    pub fn new(partition: Partition<R>, basis: BasisSpec<R>, values: Vec<Vec<Vector<R>>>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::Dimension { expected: partition.len(), found: values.len() });
        }
        let dim = values.first().and_then(|v| v.first()).map_or(0, Vector::dim);
        for interval in &values {
            if interval.len() != basis.len() {
                return Err(Error::Dimension { expected: basis.len(), found: interval.len() });
            }
            for v in interval {
                v.check_dim(dim)?;
            }
        }
        Ok(Self { partition, basis, values })
    }

    pub fn partition(&self) -> &Partition<R> {
        &self.partition
    }

    pub fn basis(&self) -> &BasisSpec<R> {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.values[0][0].dim()
    }

    /// Nodal values on interval `m`.
    pub fn interval_values(&self, m: usize) -> &[Vector<R>] {
        &self.values[m]
    }

    pub fn values(&self) -> &[Vec<Vector<R>>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec<Vector<R>>> {
        self.values
    }

    /// Value at local coordinate `s ∈ [0, 1]` of interval `m`.
    pub fn eval_local(&self, m: usize, s: &R) -> Vector<R> {
        combine(&self.values[m], &self.basis.values(s))
    }

    /// `order`-th time derivative at local coordinate `s` of interval `m`.
    pub fn derivative_local(&self, m: usize, s: &R, order: usize) -> Vector<R> {
        if order == 0 {
            return self.eval_local(m, s);
        }
        if order > self.degree() {
            return Vector::zeros(self.dim(), &s.context());
        }
        let mut v = combine(&self.values[m], &self.basis.derivatives(s, order));
        let h = self.partition.width(m).powi(order as i32);
        let inv = R::one(&s.context()) / h;
        v.scale_mut(&inv);
        v
    }

    pub fn evaluate(&self, t: &R) -> Result<Vector<R>> {
        let m = self.partition.locate(t)?;
        Ok(self.eval_local(m, &self.partition.local(m, t)))
    }

    pub fn evaluate_derivative(&self, t: &R, order: usize) -> Result<Vector<R>> {
        let m = self.partition.locate(t)?;
        Ok(self.derivative_local(m, &self.partition.local(m, t), order))
    }

    /// Right limit at `t_m` (interval `m` evaluated at `s = 0`).
    pub fn right_limit(&self, m: usize) -> Vector<R> {
        let zero = self.partition.start().zero_like();
        self.eval_local(m, &zero)
    }

    /// Left limit at `t_{m+1}` (interval `m` evaluated at `s = 1`).
    pub fn left_limit(&self, m: usize) -> Vector<R> {
        let one = R::one(&self.partition.start().context());
        self.eval_local(m, &one)
    }

    /// Jump `v(t_m^+) - v(t_m^-)` at the left end of interval `m`; zero for `m = 0`.
    pub fn jump(&self, m: usize) -> Vector<R> {
        if m == 0 {
            return Vector::zeros(self.dim(), &self.partition.start().context());
        }
        &self.right_limit(m) - &self.left_limit(m - 1)
    }

    /// `∫ v dt` over the whole partition with `rule` on each interval.
    pub fn integrate(&self, rule: &QuadratureRule<R>) -> Vector<R> {
        let ctx = self.partition.start().context();
        let mut acc = Vector::zeros(self.dim(), &ctx);
        for m in 0..self.partition.len() {
            let h = self.partition.width(m);
            for (s, w) in rule.points().iter().zip(rule.weights()) {
                acc.axpy(&(w.clone() * &h), &self.eval_local(m, s));
            }
        }
        acc
    }
}

/// `Σ_k c_k v_k`.
pub(crate) fn combine<R: Real>(vs: &[Vector<R>], coeffs: &[R]) -> Vector<R> {
    let mut acc = vs[0].scaled(&coeffs[0]);
    for (v, c) in vs.iter().zip(coeffs).skip(1) {
        acc.axpy(c, v);
    }
    acc
}

/// Nodal interpolant of `v` on `partition` with `basis`.
pub fn interpolate_pi<R, F>(mut v: F, partition: &Partition<R>, basis: &BasisSpec<R>) -> Result<PiecewisePolynomial<R>>
where
    R: Real,
    F: FnMut(&R) -> Result<Vector<R>>,
{
    let mut values = Vec::with_capacity(partition.len());
    for m in 0..partition.len() {
        let interval = basis
            .nodes()
            .iter()
            .map(|tau| v(&partition.global(m, tau)))
            .collect::<Result<Vec<_>>>()?;
        values.push(interval);
    }
    PiecewisePolynomial::new(partition.clone(), basis.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{lagrange_basis, NodeFamily};
    use crate::numerics::{BigFloat, PrecisionContext};
    use proptest::prelude::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(40).unwrap()
    }

    fn scalar(x: BigFloat) -> Vector<BigFloat> {
        Vector::from_vec(vec![x])
    }

    #[test]
    fn constants_are_reproduced() {
        let c = ctx();
        let part = Partition::uniform(&BigFloat::zero(&c), &BigFloat::from_i64(2, &c), 5, &c).unwrap();
        let basis = lagrange_basis(3, NodeFamily::Lobatto, &c).unwrap();
        let k = BigFloat::from_f64(-1.25, &c);
        let pi = interpolate_pi(|_| Ok(scalar(k.clone())), &part, &basis).unwrap();
        for i in 0..=40 {
            let t = BigFloat::from_ratio(i, 20, &c);
            let got = pi.evaluate(&t).unwrap();
            assert!((got[0].clone() - &k).abs() <= c.eps::<BigFloat>() * BigFloat::from_i64(10, &c));
        }
        assert!(pi.jump(3).norm().is_zero());
    }

    #[test]
    fn sine_interpolation_error_matches_dense_oracle() {
        let c = PrecisionContext::ieee_double();
        let part = Partition::uniform(&0.0, &1.0, 1, &c).unwrap();
        let basis = lagrange_basis(2, NodeFamily::Lobatto, &c).unwrap();
        let pi = interpolate_pi(|t: &f64| Ok(Vector::from_vec(vec![t.sin()])), &part, &basis).unwrap();
        // Oracle: the explicit quadratic through (0, sin 0), (1/2, sin 1/2), (1, sin 1).
        let (a, b) = (0.5f64.sin(), 1f64.sin());
        let quad = |t: f64| 2.0 * (t - 0.5) * (t - 1.0) * 0.0 - 4.0 * t * (t - 1.0) * a + 2.0 * t * (t - 0.5) * b;
        let mut max_oracle = 0.0f64;
        let mut max_pi = 0.0f64;
        for i in 0..=10_000 {
            let t = i as f64 / 10_000.0;
            max_oracle = max_oracle.max((quad(t) - t.sin()).abs());
            max_pi = max_pi.max((pi.evaluate(&t).unwrap()[0] - t.sin()).abs());
        }
        assert!((max_pi - max_oracle).abs() < 1e-14, "{max_pi} vs {max_oracle}");
        // Classical bound |f'''|/(9√3) * h^3 / 8 for three equispaced points.
        assert!(max_pi < 1.0 / (9.0 * 3f64.sqrt()) / 8.0 * 1.01);
    }

    #[test]
    fn derivative_of_linear_piece() {
        let c = PrecisionContext::ieee_double();
        let part = Partition::from_nodes(vec![0.0, 0.5]).unwrap();
        let basis = lagrange_basis(1, NodeFamily::Lobatto, &c).unwrap();
        let pp = PiecewisePolynomial::new(
            part,
            basis,
            vec![vec![Vector::from_vec(vec![1.0]), Vector::from_vec(vec![2.0])]],
        )
        .unwrap();
        assert!((pp.evaluate_derivative(&0.2, 1).unwrap()[0] - 2.0).abs() < 1e-15);
        assert_eq!(pp.evaluate_derivative(&0.2, 2).unwrap()[0], 0.0);
        assert!((pp.evaluate(&0.25).unwrap()[0] - 1.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn polynomials_are_reproduced(coeffs in prop::collection::vec(-3.0f64..3.0, 1..5), seed in 0u64..1000) {
            let c = ctx();
            let p = 4;
            let poly = crate::discretization::Poly::new(
                coeffs.iter().map(|&x| BigFloat::from_f64(x, &c)).collect());
            let magnitude = crate::discretization::Poly::new(
                coeffs.iter().map(|&x| BigFloat::from_f64(x.abs(), &c)).collect());
            let part = Partition::uniform(&BigFloat::zero(&c), &BigFloat::from_i64(3, &c), 3, &c).unwrap();
            for family in [NodeFamily::Lobatto, NodeFamily::Gauss] {
                let basis = lagrange_basis(p, family, &c).unwrap();
                let pi = interpolate_pi(|t| Ok(scalar(poly.eval(t))), &part, &basis).unwrap();
                // Projection: interpolating the interpolant changes nothing.
                let again = interpolate_pi(|t| pi.evaluate(t), &part, &basis).unwrap();
                for i in 0..20u64 {
                    let t = BigFloat::from_f64(3.0 * (((seed * 31 + i * 17) % 997) as f64 / 996.0), &c);
                    let want = poly.eval(&t);
                    let scale = magnitude.eval(&BigFloat::from_i64(3, &c));
                    let tol = c.eps::<BigFloat>() * BigFloat::from_i64(100, &c);
                    prop_assert!((pi.evaluate(&t).unwrap()[0].clone() - &want).abs() <= tol * &scale);
                    let d = (again.evaluate(&t).unwrap()[0].clone() - pi.evaluate(&t).unwrap()[0].clone()).abs();
                    prop_assert!(d <= c.eps::<BigFloat>() * BigFloat::from_i64(100, &c) * &scale);
                }
            }
        }
    }
}
