//! Initial value problems `u' = f(u, t)`, `u(0) = u0`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, PrecisionContext, Real, Vector};

/// Right-hand side, Jacobian and initial data of an IVP.
pub trait Problem<R: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn rhs(&self, u: &Vector<R>, t: &R) -> Vector<R>;

    /// `∂f/∂u` at `(u, t)`.
    fn jacobian(&self, u: &Vector<R>, t: &R) -> Matrix<R>;

    fn initial(&self) -> Vector<R>;

    /// Exact solution, when known.
    fn exact(&self, _t: &R) -> Option<Vector<R>> {
        None
    }

    /// The constant matrix `A` if `f(u, t) = A u`.
    fn linear_matrix(&self) -> Option<&Matrix<R>> {
        None
    }
}

/// Lorenz system with the classical parameters `σ = 10`, `r = 28`, `b = 8/3`.
#[derive(Debug, Clone)]
pub struct Lorenz<R> {
    sigma: R,
    r: R,
    b: R,
    u0: Vector<R>,
}

pub fn lorenz<R: Real>(ctx: &PrecisionContext) -> Lorenz<R> {
    Lorenz {
        sigma: R::from_i64(10, ctx),
        r: R::from_i64(28, ctx),
        b: R::from_ratio(8, 3, ctx),
        u0: Vector::from_f64s(&[1.0, 0.0, 0.0], ctx),
    }
}

impl<R: Real> Lorenz<R> {
    /// `∇·f = -(σ + 1 + b)`, the same at every state.
    pub fn divergence(&self) -> R {
        -(self.sigma.clone() + R::one(&self.b.context()) + &self.b)
    }
}

impl<R: Real> Problem<R> for Lorenz<R> {
    fn dim(&self) -> usize {
        3
    }

    fn label(&self) -> String {
        "lorenz".into()
    }

    fn rhs(&self, u: &Vector<R>, _t: &R) -> Vector<R> {
        let (x, y, z) = (&u[0], &u[1], &u[2]);
        Vector::from_vec(vec![
            self.sigma.clone() * (y.clone() - x),
            self.r.clone() * x - y - x.clone() * z,
            x.clone() * y - self.b.clone() * z,
        ])
    }

    fn jacobian(&self, u: &Vector<R>, _t: &R) -> Matrix<R> {
        let (x, y, z) = (&u[0], &u[1], &u[2]);
        let ctx = x.context();
        let one = R::one(&ctx);
        let zero = R::zero(&ctx);
        Matrix::from_rows(vec![
            vec![-self.sigma.clone(), self.sigma.clone(), zero],
            vec![self.r.clone() - z, -one, -x.clone()],
            vec![y.clone(), x.clone(), -self.b.clone()],
        ])
        .expect("3x3")
    }

    fn initial(&self) -> Vector<R> {
        self.u0.clone()
    }
}

/// Van der Pol oscillator `u1' = u2`, `u2' = μ(1 - u1²)u2 - u1` from `(2, 0)`.
#[derive(Debug, Clone)]
pub struct VanDerPol<R> {
    mu: R,
    u0: Vector<R>,
}

pub fn van_der_pol<R: Real>(mu: &R, ctx: &PrecisionContext) -> Result<VanDerPol<R>> {
    if !(mu > &R::zero(ctx)) {
        return Err(Error::Problem(format!("van der Pol needs mu > 0, got {mu}")));
    }
    Ok(VanDerPol { mu: mu.clone(), u0: Vector::from_f64s(&[2.0, 0.0], ctx) })
}

impl<R: Real> VanDerPol<R> {
    pub fn mu(&self) -> &R {
        &self.mu
    }
}

impl<R: Real> Problem<R> for VanDerPol<R> {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> String {
        format!("vanderpol(mu={})", self.mu)
    }

    fn rhs(&self, u: &Vector<R>, _t: &R) -> Vector<R> {
        let one = R::one(&u[0].context());
        let damp = self.mu.clone() * (one - u[0].clone() * &u[0]);
        Vector::from_vec(vec![u[1].clone(), damp * &u[1] - &u[0]])
    }

    fn jacobian(&self, u: &Vector<R>, _t: &R) -> Matrix<R> {
        let ctx = u[0].context();
        let one = R::one(&ctx);
        let d21 = -(self.mu.clone() * R::from_i64(2, &ctx) * &u[0] * &u[1]) - &one;
        let d22 = self.mu.clone() * (one.clone() - u[0].clone() * &u[0]);
        Matrix::from_rows(vec![vec![R::zero(&ctx), one], vec![d21, d22]]).expect("2x2")
    }

    fn initial(&self) -> Vector<R> {
        self.u0.clone()
    }
}

/// `u' = A u` with closed-form solution and dual.
#[derive(Debug, Clone)]
pub struct LinearProblem<R> {
    a: Matrix<R>,
    u0: Vector<R>,
    label: String,
}

pub fn linear_test<R: Real>(a: Matrix<R>, u0: Vector<R>) -> Result<LinearProblem<R>> {
    LinearProblem::new(a, u0, "linear")
}

impl<R: Real> LinearProblem<R> {
    pub fn new(a: Matrix<R>, u0: Vector<R>, label: impl Into<String>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension { expected: a.rows(), found: a.cols() });
        }
        u0.check_dim(a.rows())?;
        Ok(Self { a, u0, label: label.into() })
    }

    pub fn matrix(&self) -> &Matrix<R> {
        &self.a
    }

    /// Same matrix, different initial value.
    pub fn with_initial(&self, u0: Vector<R>) -> Result<Self> {
        Self::new(self.a.clone(), u0, self.label.clone())
    }

    /// `exp(t A) v`.
    pub fn propagate(&self, t: &R, v: &Vector<R>) -> Vector<R> {
        self.a.scaled(t).exp().mul_vec(v)
    }

    /// Exact dual `z(t) = exp((T - t) Aᵀ) z_T`.
    pub fn exact_dual(&self, t: &R, end: &R, z_end: &Vector<R>) -> Vector<R> {
        self.a.transpose().scaled(&(end.clone() - t)).exp().mul_vec(z_end)
    }

    /// Reads a matrix and initial value from a text file.
    ///
    /// Lines starting with `#` are ignored. The remaining lines are the rows
    /// of `A` followed by one line holding `u0`, whitespace separated.
    pub fn from_file(path: &Path, ctx: &PrecisionContext) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let label = format!("linear:{}", path.display());
        Self::parse(&text, ctx, label)
    }

    pub fn parse(text: &str, ctx: &PrecisionContext, label: impl Into<String>) -> Result<Self> {
        let rows: Vec<Vec<R>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|x| R::parse(x, ctx)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let Some((u0, a)) = rows.split_last() else {
            return Err(Error::Format("linear problem file is empty".into()));
        };
        if a.len() != u0.len() {
            return Err(Error::Dimension { expected: u0.len(), found: a.len() });
        }
        Self::new(Matrix::from_rows(a.to_vec())?, Vector::from_vec(u0.clone()), label)
    }
}

impl<R: Real> Problem<R> for LinearProblem<R> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn rhs(&self, u: &Vector<R>, _t: &R) -> Vector<R> {
        self.a.mul_vec(u)
    }

    fn jacobian(&self, _u: &Vector<R>, _t: &R) -> Matrix<R> {
        self.a.clone()
    }

    fn initial(&self) -> Vector<R> {
        self.u0.clone()
    }

    fn exact(&self, t: &R) -> Option<Vector<R>> {
        Some(self.propagate(t, &self.u0))
    }

    fn linear_matrix(&self) -> Option<&Matrix<R>> {
        Some(&self.a)
    }
}

type RhsFn<R> = dyn Fn(&Vector<R>, &R) -> Vector<R> + Send + Sync;
type JacFn<R> = dyn Fn(&Vector<R>, &R) -> Matrix<R> + Send + Sync;
type ExactFn<R> = dyn Fn(&R) -> Vector<R> + Send + Sync;

/// Problem assembled from closures.
#[derive(Clone)]
pub struct FnProblem<R> {
    label: String,
    dim: usize,
    rhs: Arc<RhsFn<R>>,
    jac: Arc<JacFn<R>>,
    exact: Option<Arc<ExactFn<R>>>,
    u0: Vector<R>,
}

impl<R: Real> FnProblem<R> {
    pub fn new(
        label: impl Into<String>,
        u0: Vector<R>,
        rhs: impl Fn(&Vector<R>, &R) -> Vector<R> + Send + Sync + 'static,
        jac: impl Fn(&Vector<R>, &R) -> Matrix<R> + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), dim: u0.dim(), rhs: Arc::new(rhs), jac: Arc::new(jac), exact: None, u0 }
    }

    pub fn with_exact(mut self, exact: impl Fn(&R) -> Vector<R> + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }
}

impl<R> fmt::Debug for FnProblem<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnProblem").field("label", &self.label).field("dim", &self.dim).finish()
    }
}

impl<R: Real> Problem<R> for FnProblem<R> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn rhs(&self, u: &Vector<R>, t: &R) -> Vector<R> {
        (self.rhs)(u, t)
    }

    fn jacobian(&self, u: &Vector<R>, t: &R) -> Matrix<R> {
        (self.jac)(u, t)
    }

    fn initial(&self) -> Vector<R> {
        self.u0.clone()
    }

    fn exact(&self, t: &R) -> Option<Vector<R>> {
        self.exact.as_ref().map(|e| e(t))
    }
}

/// Problem selector as written on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Lorenz,
    VanDerPol,
    Linear(String),
}

impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "lorenz" => Ok(ProblemSpec::Lorenz),
            "vanderpol" | "van_der_pol" => Ok(ProblemSpec::VanDerPol),
            _ => match s.strip_prefix("linear:") {
                Some(path) if !path.is_empty() => Ok(ProblemSpec::Linear(path.to_string())),
                _ => Err(Error::Config(format!("unknown problem '{s}'"))),
            },
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Lorenz => f.write_str("lorenz"),
            ProblemSpec::VanDerPol => f.write_str("vanderpol"),
            ProblemSpec::Linear(p) => write!(f, "linear:{p}"),
        }
    }
}

impl ProblemSpec {
    /// Instantiates the problem at `ctx`; `mu` is used by van der Pol only.
    pub fn build<R: Real>(&self, mu: &str, ctx: &PrecisionContext) -> Result<Box<dyn Problem<R>>> {
        Ok(match self {
            ProblemSpec::Lorenz => Box::new(lorenz::<R>(ctx)),
            ProblemSpec::VanDerPol => Box::new(van_der_pol(&R::parse(mu, ctx)?, ctx)?),
            ProblemSpec::Linear(path) => Box::new(LinearProblem::<R>::from_file(Path::new(path), ctx)?),
        })
    }
}

/// `u' = λ u` from `u0`, with exact solution.
pub fn scalar_linear<R: Real>(lambda: &R, u0: &R) -> LinearProblem<R> {
    let a = Matrix::from_rows(vec![vec![lambda.clone()]]).expect("1x1");
    LinearProblem::new(a, Vector::from_vec(vec![u0.clone()]), format!("scalar(lambda={lambda})"))
        .expect("1x1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;
    use proptest::prelude::*;

    fn dctx() -> PrecisionContext {
        PrecisionContext::ieee_double()
    }

    fn mat(m: &Matrix<f64>) -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    }

    #[test]
    fn lorenz_examples() {
        let c = dctx();
        let p = lorenz::<f64>(&c);
        let u = p.initial();
        assert_eq!(u.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(p.rhs(&u, &0.0).as_slice(), &[-10.0, 28.0, 0.0]);
        assert_eq!(
            mat(&p.jacobian(&u, &0.0)),
            vec![vec![-10.0, 10.0, 0.0], vec![28.0, -1.0, -1.0], vec![0.0, 1.0, -8.0 / 3.0]]
        );
        let hc = PrecisionContext::new(60).unwrap();
        let hp = lorenz::<BigFloat>(&hc);
        let want = BigFloat::from_ratio(-41, 3, &hc);
        assert_eq!(hp.divergence(), want);
        let state = Vector::from_f64s(&[3.5, -2.0, 17.0], &hc);
        assert_eq!(hp.jacobian(&state, &BigFloat::zero(&hc)).trace(), want);
    }

    #[test]
    fn van_der_pol_examples() {
        let c = dctx();
        let p = van_der_pol(&1000.0, &c).unwrap();
        let u = p.initial();
        assert_eq!(p.rhs(&u, &0.0).as_slice(), &[0.0, -2.0]);
        assert_eq!(mat(&p.jacobian(&u, &0.0)), vec![vec![0.0, 1.0], vec![-1.0, -3000.0]]);
        for mu in [0.5, 1000.0] {
            let q = van_der_pol(&mu, &c).unwrap();
            assert_eq!(q.rhs(&Vector::from_vec(vec![1.0, 1.0]), &0.0).as_slice(), &[1.0, -1.0]);
        }
        assert!(van_der_pol(&0.0, &c).is_err());
        assert!(van_der_pol(&-1.0, &c).is_err());
    }

    #[test]
    fn linear_examples() {
        let c = PrecisionContext::new(40).unwrap();
        let zero = linear_test::<BigFloat>(
            Matrix::from_f64_rows(&[&[0.0]], &c).unwrap(),
            Vector::from_f64s(&[1.0], &c),
        )
        .unwrap();
        assert_eq!(zero.exact(&BigFloat::from_i64(7, &c)).unwrap()[0], BigFloat::one(&c));

        let decay = scalar_linear(&BigFloat::from_i64(-1, &c), &BigFloat::one(&c));
        let u1 = decay.exact(&BigFloat::one(&c)).unwrap();
        let want = BigFloat::from_i64(-1, &c).exp();
        assert!(((u1[0].clone() - &want) / &want).abs() < BigFloat::from_f64(1e-38, &c));

        let rot = linear_test::<BigFloat>(
            Matrix::from_f64_rows(&[&[0.0, 1.0], &[-1.0, 0.0]], &c).unwrap(),
            Vector::from_f64s(&[1.0, 0.0], &c),
        )
        .unwrap();
        for t in [0.3, 1.7, 4.0] {
            let n = rot.exact(&BigFloat::from_f64(t, &c)).unwrap().norm();
            assert!((n - BigFloat::one(&c)).abs() < BigFloat::from_f64(1e-38, &c));
        }
        assert!(linear_test::<f64>(
            Matrix::from_f64_rows(&[&[1.0, 2.0]], &dctx()).unwrap(),
            Vector::from_vec(vec![1.0])
        )
        .is_err());
        assert!(linear_test::<f64>(Matrix::identity(2, &dctx()), Vector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn linear_dual_solves_adjoint_equation() {
        let c = PrecisionContext::new(40).unwrap();
        let p = scalar_linear(&BigFloat::from_i64(-1, &c), &BigFloat::one(&c));
        let z0 = p.exact_dual(&BigFloat::zero(&c), &BigFloat::one(&c), &Vector::from_f64s(&[1.0], &c));
        // -z' = -z backward from z(1) = 1 gives z(t) = exp(t - 1).
        let e = BigFloat::from_i64(-1, &c).exp();
        assert!((z0[0].clone() - e).abs() < BigFloat::from_f64(1e-38, &c));
    }

    #[test]
    fn parse_linear_file() {
        let c = dctx();
        let text = "# rotation\n0 1\n-1 0\n\n1 0\n";
        let p = LinearProblem::<f64>::parse(text, &c, "linear:rot").unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.initial().as_slice(), &[1.0, 0.0]);
        assert!(LinearProblem::<f64>::parse("1 2\n3\n", &c, "x").is_err());
        assert!(LinearProblem::<f64>::parse("# nothing\n", &c, "x").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        std::fs::write(&path, text).unwrap();
        let spec: ProblemSpec = format!("linear:{}", path.display()).parse().unwrap();
        let built = spec.build::<f64>("1000", &c).unwrap();
        assert_eq!(built.rhs(&built.initial(), &0.0).as_slice(), &[0.0, -1.0]);
        assert_eq!("lorenz".parse::<ProblemSpec>().unwrap(), ProblemSpec::Lorenz);
        assert!("heat".parse::<ProblemSpec>().is_err());
        assert!("linear:".parse::<ProblemSpec>().is_err());
    }

    #[test]
    fn averaged_identity_is_exact_for_linear() {
        let c = PrecisionContext::new(64).unwrap();
        let p = linear_test::<BigFloat>(
            Matrix::from_f64_rows(&[&[0.3, -1.2], &[0.7, 0.1]], &c).unwrap(),
            Vector::from_f64s(&[1.0, 2.0], &c),
        )
        .unwrap();
        let t = BigFloat::zero(&c);
        let u = Vector::from_f64s(&[0.25, -3.0], &c);
        let v = Vector::from_f64s(&[1.5, 0.125], &c);
        let lhs = p.jacobian(&u, &t).mul_vec(&(&u - &v));
        let rhs = &p.rhs(&u, &t) - &p.rhs(&v, &t);
        let tol = c.eps::<BigFloat>() * BigFloat::from_i64(10, &c) * rhs.norm();
        assert!((&lhs - &rhs).norm() <= tol);
    }

    fn fd_check(p: &dyn Problem<f64>, u: &[f64]) -> f64 {
        let c = dctx();
        let h = c.eps_f64().powf(1.0 / 3.0);
        let u = Vector::from_f64s(u, &c);
        let jac = p.jacobian(&u, &0.0);
        let mut worst = 0.0f64;
        for j in 0..p.dim() {
            let mut up = u.clone();
            let mut dn = u.clone();
            let step = h * (1.0 + u[j].abs());
            up[j] += step;
            dn[j] -= step;
            let col = (&p.rhs(&up, &0.0) - &p.rhs(&dn, &0.0)).scaled(&(0.5 / step));
            let err = (&col - &jac.column(j)).norm() / (jac.norm_inf() + 1.0);
            worst = worst.max(err);
        }
        worst
    }

    proptest! {
        #[test]
        fn jacobians_match_finite_differences(
            x in -20.0f64..20.0, y in -20.0f64..20.0, z in 0.0f64..40.0, mu in 0.1f64..1000.0
        ) {
            let c = dctx();
            let h = c.eps_f64().powf(1.0 / 3.0);
            let tol = 1e3 * h * h;
            prop_assert!(fd_check(&lorenz::<f64>(&c), &[x, y, z]) <= tol);
            let vdp = van_der_pol(&mu, &c).unwrap();
            prop_assert!(fd_check(&vdp, &[x / 10.0, y]) <= tol);
            let lin = linear_test(
                Matrix::from_f64_rows(&[&[x, y], &[z, -x]], &c).unwrap(),
                Vector::from_vec(vec![1.0, 0.0]),
            ).unwrap();
            prop_assert!(fd_check(&lin, &[y, z]) <= tol);
        }
    }
}
