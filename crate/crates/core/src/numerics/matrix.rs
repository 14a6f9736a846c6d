use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real, Vector};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize, ctx: &PrecisionContext) -> Self {
        Self { rows, cols, data: vec![R::zero(ctx); rows * cols] }
    }

    pub fn identity(n: usize, ctx: &PrecisionContext) -> Self {
        let mut m = Self::zeros(n, n, ctx);
        for i in 0..n {
            m[(i, i)] = R::one(ctx);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<R>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension { expected: c, found: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_f64_rows(rows: &[&[f64]], ctx: &PrecisionContext) -> Result<Self> {
        Self::from_rows(
            rows.iter().map(|r| r.iter().map(|&x| R::from_f64(x, ctx)).collect()).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector<R> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)].clone());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    pub fn mul_vec(&self, v: &Vector<R>) -> Vector<R> {
        debug_assert_eq!(self.cols, v.dim());
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = row[0].clone() * &v[0];
                for (a, x) in row.iter().zip(v.iter()).skip(1) {
                    acc += a.clone() * x;
                }
                acc
            })
            .collect()
    }

    /// `selfᵀ v` without forming the transpose.
    pub fn mul_vec_transposed(&self, v: &Vector<R>) -> Vector<R> {
        debug_assert_eq!(self.rows, v.dim());
        (0..self.cols)
            .map(|j| {
                let mut acc = self[(0, j)].clone() * &v[0];
                for i in 1..self.rows {
                    acc += self[(i, j)].clone() * &v[i];
                }
                acc
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = self[(i, 0)].clone() * &other[(0, j)];
                for k in 1..self.cols {
                    acc += self[(i, k)].clone() * &other[(k, j)];
                }
                data.push(acc);
            }
        }
        Self { rows: self.rows, cols: other.cols, data }
    }

    pub fn scaled(&self, s: &R) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.clone() * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b).collect(),
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> R {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut s = row[0].abs();
                for x in &row[1..] {
                    s += x.abs();
                }
                s
            })
            .reduce(R::max_of)
            .expect("nonempty matrix")
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> R {
        let mut t = self[(0, 0)].clone();
        for i in 1..self.rows {
            t += &self[(i, i)];
        }
        t
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu<R>> {
        if !self.is_square() {
            return Err(Error::Dimension { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best.is_zero() || !best.is_finite() {
                return Err(Error::Singular { interval: None });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k].clone();
            for i in k + 1..n {
                let factor = a[i * n + k].clone() / &pivot;
                if factor.is_zero() {
                    a[i * n + k] = factor;
                    continue;
                }
                for j in k + 1..n {
                    let t = a[k * n + j].clone() * &factor;
                    a[i * n + j] -= t;
                }
                a[i * n + k] = factor;
            }
        }
        Ok(Lu { n, lu: a, perm })
    }

    pub fn solve(&self, b: &Vector<R>) -> Result<Vector<R>> {
        Ok(self.lu()?.solve(b))
    }

    /// Matrix exponential `exp(self)` by scaling and squaring of the Taylor
    /// series, summed to the working precision.
    pub fn exp(&self) -> Self {
        let n = self.rows;
        let ctx = self.data[0].context();
        let half = R::from_ratio(1, 2, &ctx);
        let mut squarings = 0;
        let mut norm = self.norm_inf();
        while norm > half {
            norm = norm.mul_pow2(-1);
            squarings += 1;
        }
        let scaled = self.scaled(&R::one(&ctx).mul_pow2(-squarings));
        let eps = ctx.eps::<R>();
        let mut sum = Self::identity(n, &ctx);
        let mut term = Self::identity(n, &ctx);
        for k in 1..10_000 {
            term = term.matmul(&scaled).scaled(&(R::one(&ctx) / R::from_i64(k, &ctx)));
            sum = sum.add(&term);
            if term.norm_inf() <= eps.clone() * sum.norm_inf() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl<R> Index<(usize, usize)> for Matrix<R> {
    type Output = R;
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R> IndexMut<(usize, usize)> for Matrix<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors with row permutation.
#[derive(Debug, Clone)]
pub struct Lu<R> {
    n: usize,
    lu: Vec<R>,
    perm: Vec<usize>,
}

impl<R: Real> Lu<R> {
    pub fn solve(&self, b: &Vector<R>) -> Vector<R> {
        let n = self.n;
        let mut x: Vec<R> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 1..n {
            for j in 0..i {
                let t = self.lu[i * n + j].clone() * &x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[i * n + j].clone() * &x[j];
                x[i] -= t;
            }
            x[i] /= &self.lu[i * n + i];
        }
        Vector::from_vec(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;

    #[test]
    fn solve_small_system() {
        let c = PrecisionContext::new(40).unwrap();
        let a: Matrix<BigFloat> =
            Matrix::from_f64_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]], &c)
                .unwrap();
        let x_true = Vector::from_f64s(&[1.0, -2.0, 0.5], &c);
        let b = a.mul_vec(&x_true);
        let x = a.solve(&b).unwrap();
        let err = (&x - &x_true).norm_inf();
        assert!(err < BigFloat::from_f64(1e-38, &c));
    }

    #[test]
    fn singular_is_reported() {
        let c = PrecisionContext::ieee_double();
        let a: Matrix<f64> = Matrix::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]], &c).unwrap();
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
    }

    #[test]
    fn exponential_of_rotation_generator() {
        let c = PrecisionContext::new(50).unwrap();
        let a: Matrix<BigFloat> = Matrix::from_f64_rows(&[&[0.0, 1.0], &[-1.0, 0.0]], &c).unwrap();
        let e = a.exp();
        let one = BigFloat::one(&c);
        let tol = BigFloat::from_f64(1e-45, &c);
        assert!((e[(0, 0)].clone() - one.cos()).abs() < tol);
        assert!((e[(0, 1)].clone() - one.sin()).abs() < tol);
        assert!((e[(1, 0)].clone() + one.sin()).abs() < tol);
    }

    #[test]
    fn exponential_scalar() {
        let c = PrecisionContext::new(64).unwrap();
        let a: Matrix<BigFloat> = Matrix::from_f64_rows(&[&[-3.5]], &c).unwrap();
        let want = BigFloat::from_f64(-3.5, &c).exp();
        let rel = ((a.exp()[(0, 0)].clone() - &want) / &want).abs();
        assert!(rel < BigFloat::from_f64(1e-60, &c));
    }
}
