use crate::numerics::{PrecisionContext, Real};

/// Polynomial in monomial form, coefficients from the constant term up.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<R> {
    coeffs: Vec<R>,
}

impl<R: Real> Poly<R> {
    pub fn new(coeffs: Vec<R>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn constant(c: R) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    /// Nominal degree (length of the coefficient list minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: &R) -> R {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self, order: usize) -> Self {
        let ctx = self.coeffs[0].context();
        if order > self.degree() {
            return Self::constant(R::zero(&ctx));
        }
        let coeffs = (order..self.coeffs.len())
            .map(|i| {
                let falling: i64 = ((i - order + 1)..=i).map(|k| k as i64).product();
                self.coeffs[i].clone() * R::from_i64(falling, &ctx)
            })
            .collect();
        Self { coeffs }
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let ctx = self.coeffs[0].context();
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(R::zero(&ctx));
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.clone() / R::from_i64(i as i64 + 1, &ctx));
        }
        Self { coeffs }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let ctx = self.coeffs[0].context();
        let mut coeffs = vec![R::zero(&ctx); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a.clone() * b;
            }
        }
        Self { coeffs }
    }

    /// `∫_a^b p(x) dx`.
    pub fn integral(&self, a: &R, b: &R) -> R {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    /// The monic-free product `∏ (x - r)` over `roots`.
    pub fn from_roots(roots: &[R], ctx: &PrecisionContext) -> Self {
        let mut p = Self::constant(R::one(ctx));
        for r in roots {
            p = p.mul(&Self::new(vec![-r.clone(), R::one(ctx)]));
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calculus_on_cubic() {
        let c = PrecisionContext::ieee_double();
        // 1 + 2x + 3x^2 + 4x^3
        let p: Poly<f64> = Poly::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.eval(&2.0), 49.0);
        assert_eq!(p.derivative(1).coeffs(), &[2.0, 6.0, 12.0]);
        assert_eq!(p.derivative(3).coeffs(), &[24.0]);
        assert_eq!(p.derivative(4).coeffs(), &[0.0]);
        assert_eq!(p.integral(&0.0, &1.0), 1.0 + 1.0 + 1.0 + 1.0);
        let q = Poly::from_roots(&[1.0, -1.0], &c);
        assert_eq!(q.coeffs(), &[-1.0, 0.0, 1.0]);
    }
}
