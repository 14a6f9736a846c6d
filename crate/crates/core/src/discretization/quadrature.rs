use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real, Vector};

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
pub(crate) fn legendre<R: Real>(n: usize, x: &R, ctx: &PrecisionContext) -> (R, R) {
    let one = R::one(ctx);
    if n == 0 {
        return (one, R::zero(ctx));
    }
    let mut prev = one.clone();
    let mut cur = x.clone();
    for k in 1..n {
        let kk = R::from_i64(k as i64, ctx);
        let next = (R::from_i64(2 * k as i64 + 1, ctx) * x * &cur - kk.clone() * &prev)
            / R::from_i64(k as i64 + 1, ctx);
        prev = cur;
        cur = next;
    }
    // P_n' = n (x P_n - P_{n-1}) / (x^2 - 1); the endpoint values are n(n+1)/2 (±1)^{n+1}.
    let x2m1 = x.clone() * x - &one;
    let deriv = if x2m1.is_zero() {
        let v = R::from_i64((n * (n + 1) / 2) as i64, ctx);
        if *x < R::zero(ctx) && n % 2 == 0 {
            -v
        } else {
            v
        }
    } else {
        R::from_i64(n as i64, ctx) * (x.clone() * &cur - prev) / x2m1
    };
    (cur, deriv)
}

/// Newton iteration on `g` starting at `x0`, stopping once the step is
/// below a few ulps or stops shrinking.
fn newton_root<R: Real>(
    x0: f64,
    ctx: &PrecisionContext,
    g: impl Fn(&R) -> (R, R),
) -> R {
    let tol = ctx.eps::<R>().mul_pow2(3);
    let mut x = R::from_f64(x0, ctx);
    let mut last: Option<R> = None;
    for _ in 0..200 {
        let (v, dv) = g(&x);
        if dv.is_zero() {
            break;
        }
        let dx = v / dv;
        x -= &dx;
        let step = dx.abs();
        if step <= tol {
            break;
        }
        if let Some(prev) = &last {
            // Stagnation at the rounding level: one more step cannot help.
            if step >= *prev && step.to_f64() < 1e-3 {
                break;
            }
        }
        last = Some(step);
    }
    x
}

/// Gauss–Legendre points (ascending) and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre_points<R: Real>(n: usize, ctx: &PrecisionContext) -> (Vec<R>, Vec<R>) {
    let mut pts = Vec::with_capacity(n);
    let mut wts = Vec::with_capacity(n);
    let one = R::one(ctx);
    for i in 0..n {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let x: R = newton_root(guess, ctx, |x| legendre(n, x, ctx));
        let (_, dp) = legendre(n, &x, ctx);
        let w = R::from_i64(2, ctx) / ((one.clone() - x.clone() * &x) * dp.clone() * &dp);
        pts.push(x);
        wts.push(w);
    }
    pts.reverse();
    wts.reverse();
    // Symmetrise: the rule is exactly symmetric about the origin.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = (pts[j].clone() - &pts[i]).mul_pow2(-1);
        pts[i] = -x.clone();
        pts[j] = x;
        let w = (wts[i].clone() + &wts[j]).mul_pow2(-1);
        wts[i] = w.clone();
        wts[j] = w;
    }
    if n % 2 == 1 {
        pts[n / 2] = R::zero(ctx);
    }
    (pts, wts)
}

/// Gauss–Lobatto points (ascending, endpoints included) and weights on `[-1, 1]`.
pub(crate) fn gauss_lobatto_points<R: Real>(n: usize, ctx: &PrecisionContext) -> (Vec<R>, Vec<R>) {
    assert!(n >= 2);
    let p = n - 1;
    let one = R::one(ctx);
    let mut pts = vec![-one.clone()];
    for i in (1..p).rev() {
        let guess = (std::f64::consts::PI * i as f64 / p as f64).cos();
        // Roots of P_p' via Newton, with P_p'' from the Legendre equation.
        let x: R = newton_root(guess, ctx, |x| {
            let (pv, dp) = legendre(p, x, ctx);
            let d2 = (R::from_i64(2, ctx) * x * &dp - R::from_i64((p * (p + 1)) as i64, ctx) * pv)
                / (one.clone() - x.clone() * x);
            (dp, d2)
        });
        pts.push(x);
    }
    pts.push(one.clone());
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = (pts[j].clone() - &pts[i]).mul_pow2(-1);
        pts[i] = -x.clone();
        pts[j] = x;
    }
    if n % 2 == 1 {
        pts[n / 2] = R::zero(ctx);
    }
    let scale = R::from_i64((p * (p + 1)) as i64, ctx);
    let wts = pts
        .iter()
        .map(|x| {
            let (pv, _) = legendre(p, x, ctx);
            R::from_i64(2, ctx) / (scale.clone() * &pv * &pv)
        })
        .collect();
    (pts, wts)
}

/// Quadrature rule on the reference interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<R> {
    points: Vec<R>,
    weights: Vec<R>,
    exactness: usize,
}

impl<R: Real> QuadratureRule<R> {
    /// `n`-point Gauss–Legendre rule, exact through degree `2n - 1`.
    pub fn gauss_legendre(n: usize, ctx: &PrecisionContext) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("quadrature needs at least one point".into()));
        }
        let (x, w) = gauss_legendre_points::<R>(n, ctx);
        Ok(Self::from_reference(x, w, 2 * n - 1, ctx))
    }

    /// `n`-point Gauss–Lobatto rule, exact through degree `2n - 3`.
    pub fn gauss_lobatto(n: usize, ctx: &PrecisionContext) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("Lobatto quadrature needs at least two points".into()));
        }
        let (x, w) = gauss_lobatto_points::<R>(n, ctx);
        Ok(Self::from_reference(x, w, 2 * n - 3, ctx))
    }

    /// Smallest Gauss–Legendre rule exact through `degree`.
    pub fn exact_for(degree: usize, ctx: &PrecisionContext) -> Result<Self> {
        Self::gauss_legendre(degree / 2 + 1, ctx)
    }

    /// Rule from points and weights already on `[0, 1]`.
    pub fn from_parts(points: Vec<R>, weights: Vec<R>, exactness: usize) -> Self {
        assert_eq!(points.len(), weights.len());
        Self { points, weights, exactness }
    }

    fn from_reference(x: Vec<R>, w: Vec<R>, exactness: usize, ctx: &PrecisionContext) -> Self {
        let one = R::one(ctx);
        let points = x.into_iter().map(|x| (x + &one).mul_pow2(-1)).collect();
        let weights = w.into_iter().map(|w| w.mul_pow2(-1)).collect();
        Self { points, weights, exactness }
    }

    pub fn points(&self) -> &[R] {
        &self.points
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        self.exactness
    }

    /// `∫_a^b g`, with `g` vector-valued.
    pub fn integrate<F>(&self, a: &R, b: &R, mut g: F) -> Result<Vector<R>>
    where
        F: FnMut(&R) -> Result<Vector<R>>,
    {
        let h = b.clone() - a;
        let mut acc: Option<Vector<R>> = None;
        for (s, w) in self.points.iter().zip(&self.weights) {
            let v = g(&(a.clone() + h.clone() * s))?;
            let w = w.clone() * &h;
            match &mut acc {
                None => acc = Some(v.scaled(&w)),
                Some(acc) => acc.axpy(&w, &v),
            }
        }
        Ok(acc.expect("rule has points"))
    }

    /// `∫_a^b g` for scalar `g`.
    pub fn integrate_scalar<F>(&self, a: &R, b: &R, mut g: F) -> Result<R>
    where
        F: FnMut(&R) -> Result<R>,
    {
        let h = b.clone() - a;
        let mut acc = h.zero_like();
        for (s, w) in self.points.iter().zip(&self.weights) {
            acc += g(&(a.clone() + h.clone() * s))? * w;
        }
        Ok(acc * h)
    }
}

/// Composite integration of `g` over `[a, b]` split into `pieces` equal panels.
pub fn integrate<R, F>(g: F, a: &R, b: &R, rule: &QuadratureRule<R>, pieces: usize) -> Result<Vector<R>>
where
    R: Real,
    F: FnMut(&R) -> Result<Vector<R>>,
{
    if !(a < b) {
        return Err(Error::Config(format!("integration bounds must satisfy a < b ({a} >= {b})")));
    }
    let mut g = g;
    let ctx = a.context();
    let pieces = pieces.max(1);
    let n = R::from_i64(pieces as i64, &ctx);
    let len = b.clone() - a;
    let mut acc: Option<Vector<R>> = None;
    for i in 0..pieces {
        let lo = a.clone() + len.clone() * R::from_i64(i as i64, &ctx) / &n;
        let hi = if i + 1 == pieces {
            b.clone()
        } else {
            a.clone() + len.clone() * R::from_i64(i as i64 + 1, &ctx) / &n
        };
        let part = rule.integrate(&lo, &hi, &mut g)?;
        match &mut acc {
            None => acc = Some(part),
            Some(acc) => acc.add_assign_ref(&part),
        }
    }
    Ok(acc.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;

    fn ctx(d: u32) -> PrecisionContext {
        PrecisionContext::new(d).unwrap()
    }

    #[test]
    fn gauss_rule_integrates_monomials_exactly() {
        let c = ctx(60);
        let eps: BigFloat = c.eps();
        for n in 1..=12 {
            let rule = QuadratureRule::<BigFloat>::gauss_legendre(n, &c).unwrap();
            let wsum = rule.weights().iter().cloned().reduce(|a, b| a + b).unwrap();
            assert!((wsum - BigFloat::one(&c)).abs() <= eps.clone() * BigFloat::from_i64(100, &c));
            for d in 0..=rule.exactness() {
                let got = rule
                    .integrate_scalar(&BigFloat::zero(&c), &BigFloat::one(&c), |t| Ok(t.powi(d as i32)))
                    .unwrap();
                let want = BigFloat::from_ratio(1, d as i64 + 1, &c);
                let rel = ((got - &want) / &want).abs();
                assert!(rel <= eps.clone() * BigFloat::from_i64(100, &c), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn lobatto_rule_integrates_monomials_exactly() {
        let c = ctx(60);
        let eps: BigFloat = c.eps();
        for n in 2..=10 {
            let rule = QuadratureRule::<BigFloat>::gauss_lobatto(n, &c).unwrap();
            assert!(rule.points()[0].is_zero());
            assert_eq!(rule.points()[n - 1], BigFloat::one(&c));
            for d in 0..=rule.exactness() {
                let got = rule
                    .integrate_scalar(&BigFloat::zero(&c), &BigFloat::one(&c), |t| Ok(t.powi(d as i32)))
                    .unwrap();
                let want = BigFloat::from_ratio(1, d as i64 + 1, &c);
                assert!(((got - &want) / &want).abs() <= eps.clone() * BigFloat::from_i64(100, &c));
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let c = PrecisionContext::ieee_double();
        let rule = QuadratureRule::<f64>::gauss_legendre(4, &c).unwrap();
        let one = integrate(|_| Ok(Vector::from_vec(vec![1.0])), &0.0, &1.0, &rule, 1).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-15);
        let t5 = integrate(|t| Ok(Vector::from_vec(vec![t.powi(5)])), &0.0, &1.0, &rule, 1).unwrap();
        assert!((t5[0] - 1.0 / 6.0).abs() < 1e-15);
        // 4-point Gauss on 8 panels: error bound (pi^9 / (8^8 * 3472875)) * max|sin^(8)|... far below 1e-10.
        let s = integrate(|t| Ok(Vector::from_vec(vec![t.sin()])), &0.0, &std::f64::consts::PI, &rule, 8)
            .unwrap();
        assert!((s[0] - 2.0).abs() < 1e-10);
        assert!(integrate(|t| Ok(Vector::from_vec(vec![*t])), &1.0, &0.0, &rule, 1).is_err());
    }
}
