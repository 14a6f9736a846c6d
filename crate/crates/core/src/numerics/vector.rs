use std::ops::{Add, Index, IndexMut, Neg, Sub};

use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real};

/// Fixed-length state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<R>(Vec<R>);

impl<R: Real> Vector<R> {
    pub fn zeros(n: usize, ctx: &PrecisionContext) -> Self {
        Self(vec![R::zero(ctx); n])
    }

    pub fn from_vec(v: Vec<R>) -> Self {
        Self(v)
    }

    pub fn from_f64s(v: &[f64], ctx: &PrecisionContext) -> Self {
        Self(v.iter().map(|&x| R::from_f64(x, ctx)).collect())
    }

    /// The `i`-th unit vector of length `n`.
    pub fn unit(n: usize, i: usize, ctx: &PrecisionContext) -> Self {
        let mut v = Self::zeros(n, ctx);
        v.0[i] = R::one(ctx);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[R] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<R> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, R> {
        self.0.iter()
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::Dimension { expected, found: self.dim() })
        }
    }

    pub fn dot(&self, other: &Self) -> R {
        debug_assert_eq!(self.dim(), other.dim());
        let mut acc = self.0[0].clone() * &other.0[0];
        for (a, b) in self.0.iter().zip(&other.0).skip(1) {
            acc += a.clone() * b;
        }
        acc
    }

    pub fn norm_squared(&self) -> R {
        self.dot(self)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> R {
        self.norm_squared().sqrt()
    }

    /// Max-norm.
    pub fn norm_inf(&self) -> R {
        let mut best = self.0[0].abs();
        for x in &self.0[1..] {
            let a = x.abs();
            if a > best {
                best = a;
            }
        }
        best
    }

    pub fn scaled(&self, s: &R) -> Self {
        Self(self.0.iter().map(|x| x.clone() * s).collect())
    }

    pub fn scale_mut(&mut self, s: &R) {
        for x in &mut self.0 {
            *x *= s;
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: &R, x: &Self) {
        debug_assert_eq!(self.dim(), x.dim());
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += xi.clone() * a;
        }
    }

    pub fn add_assign_ref(&mut self, x: &Self) {
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += xi;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Real::is_finite)
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.0.iter().map(Real::to_f64).collect()
    }

    pub fn with_context(&self, ctx: &PrecisionContext) -> Self {
        Self(self.0.iter().map(|x| x.with_context(ctx)).collect())
    }
}

impl<R> Index<usize> for Vector<R> {
    type Output = R;
    fn index(&self, i: usize) -> &R {
        &self.0[i]
    }
}

impl<R> IndexMut<usize> for Vector<R> {
    fn index_mut(&mut self, i: usize) -> &mut R {
        &mut self.0[i]
    }
}

impl<'a, R: Real> Add<&'a Vector<R>> for &'a Vector<R> {
    type Output = Vector<R>;
    fn add(self, rhs: &'a Vector<R>) -> Vector<R> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a.clone() + b).collect())
    }
}

impl<'a, R: Real> Sub<&'a Vector<R>> for &'a Vector<R> {
    type Output = Vector<R>;
    fn sub(self, rhs: &'a Vector<R>) -> Vector<R> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a.clone() - b).collect())
    }
}

impl<R: Real> Neg for Vector<R> {
    type Output = Vector<R>;
    fn neg(self) -> Vector<R> {
        Vector(self.0.into_iter().map(|x| -x).collect())
    }
}

impl<R> FromIterator<R> for Vector<R> {
    fn from_iter<I: IntoIterator<Item = R>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}
