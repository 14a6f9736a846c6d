//! Continuous Galerkin cG(q) time stepping.
//!
//! On each interval the trial function is the degree-`q` polynomial through
//! the Lobatto nodes, and the residual is orthogonal to all polynomials of
//! degree `q - 1`. Writing the nodal values as `U_j`, this is the system
//!
//! ```text
//! U_j = U_0 + Δt Σ_l W_jl f(U(s_l), t_l),   j = 1..q,
//! ```
//!
//! with `s_l` Gauss–Legendre points on `[0, 1]` and `W` fixed by the basis.

use serde::{Deserialize, Serialize};

use crate::discretization::{shifted_legendre, BasisSpec, NodeFamily, Partition, PiecewisePolynomial, QuadratureRule};
use crate::error::{Error, Result};
use crate::numerics::{BigFloat, Matrix, PrecisionContext, Real, Vector};
use crate::problems::Problem;

/// Rounds a high-precision value to the working type.
pub(crate) fn lower<R: Real>(x: &BigFloat, ctx: &PrecisionContext) -> R {
    R::parse(&x.to_decimal(), ctx).expect("decimal output always parses")
}

/// Context with `extra` guard bits beyond `ctx`.
pub(crate) fn guarded(ctx: &PrecisionContext, extra: u32) -> PrecisionContext {
    PrecisionContext::with_bits(ctx.bits().max(53) + extra).expect("valid precision")
}

/// Per-interval operators of the cG(q) scheme.
#[derive(Debug, Clone)]
pub struct CgScheme<R> {
    q: usize,
    basis: BasisSpec<R>,
    rule: QuadratureRule<R>,
    /// `B[l][j] = λ_j(s_l)`.
    b: Matrix<R>,
    /// `W[j-1][l]` for `j = 1..q`.
    w: Matrix<R>,
}

impl<R: Real> CgScheme<R> {
    /// Operators for degree `q` with `points` Gauss–Legendre points.
    ///
    /// Everything is computed with 64 guard bits and rounded once.
    pub fn new(q: usize, points: usize, ctx: &PrecisionContext) -> Result<Self> {
        if q == 0 {
            return Err(Error::Config("cG(q) needs q >= 1".into()));
        }
        if points == 0 {
            return Err(Error::Config("need at least one quadrature point".into()));
        }
        let hi = guarded(ctx, 64);
        let basis_hi = BasisSpec::<BigFloat>::new(q, NodeFamily::Lobatto, &hi)?;
        let rule_hi = QuadratureRule::<BigFloat>::gauss_legendre(points, &hi)?;
        let zero = BigFloat::zero(&hi);
        let one = BigFloat::one(&hi);

        // D[i][j-1] = ∫ P_i λ_j' and V[i][l] = ω_l P_i(s_l) for Legendre P_i, i < q.
        let tests: Vec<_> = (0..q).map(|i| shifted_legendre::<BigFloat>(i, &hi)).collect();
        let mut d = Matrix::<BigFloat>::zeros(q, q, &hi);
        let mut v = Matrix::<BigFloat>::zeros(q, points, &hi);
        for (i, test) in tests.iter().enumerate() {
            for j in 1..=q {
                d[(i, j - 1)] = test.mul(&basis_hi.polys()[j].derivative(1)).integral(&zero, &one);
            }
            for (l, (s, wt)) in rule_hi.points().iter().zip(rule_hi.weights()).enumerate() {
                v[(i, l)] = wt.clone() * test.eval(s);
            }
        }
        let lu = d.lu()?;
        let mut w_hi = Matrix::<BigFloat>::zeros(q, points, &hi);
        for l in 0..points {
            let col = lu.solve(&v.column(l));
            for j in 0..q {
                w_hi[(j, l)] = col[j].clone();
            }
        }

        let nodes = basis_hi.nodes().iter().map(|x| lower(x, ctx)).collect();
        let basis = BasisSpec::from_nodes(nodes, NodeFamily::Lobatto, ctx)?;
        let rule = QuadratureRule::from_parts(
            rule_hi.points().iter().map(|x| lower(x, ctx)).collect(),
            rule_hi.weights().iter().map(|x| lower(x, ctx)).collect(),
            rule_hi.exactness(),
        );
        let mut b = Matrix::zeros(points, q + 1, ctx);
        for (l, s) in rule_hi.points().iter().enumerate() {
            for (j, val) in basis_hi.values(s).iter().enumerate() {
                b[(l, j)] = lower(val, ctx);
            }
        }
        let mut w = Matrix::zeros(q, points, ctx);
        for j in 0..q {
            for l in 0..points {
                w[(j, l)] = lower(&w_hi[(j, l)], ctx);
            }
        }
        Ok(Self { q, basis, rule, b, w })
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    /// Lobatto nodal basis of the trial space.
    pub fn basis(&self) -> &BasisSpec<R> {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule<R> {
        &self.rule
    }

    /// Trial function values at the quadrature points.
    pub fn at_points(&self, xs: &[Vector<R>]) -> Vec<Vector<R>> {
        (0..self.rule.len())
            .map(|l| {
                let mut acc = xs[0].scaled(&self.b[(l, 0)]);
                for (j, x) in xs.iter().enumerate().skip(1) {
                    acc.axpy(&self.b[(l, j)], x);
                }
                acc
            })
            .collect()
    }

    /// `U_0 + Δt Σ_l W_jl F_l` for `j = 1..q`.
    fn update(&self, x0: &Vector<R>, dt: &R, fs: &[Vector<R>]) -> Vec<Vector<R>> {
        (0..self.q)
            .map(|j| {
                let mut acc = fs[0].scaled(&self.w[(j, 0)]);
                for (l, f) in fs.iter().enumerate().skip(1) {
                    acc.axpy(&self.w[(j, l)], f);
                }
                acc.scale_mut(dt);
                acc.add_assign_ref(x0);
                acc
            })
            .collect()
    }

    /// Jacobian of `X_j - U_0 - Δt Σ_l W_jl f(U(s_l))` in the unknowns
    /// `X_1..X_q`, given `∂f/∂u` at each quadrature point.
    pub fn system_matrix(&self, dt: &R, jacs: &[Matrix<R>]) -> Matrix<R> {
        let n = jacs[0].rows();
        let q = self.q;
        let ctx = dt.context();
        let mut m = Matrix::identity(q * n, &ctx);
        for j in 0..q {
            for i in 1..=q {
                for (l, jac) in jacs.iter().enumerate() {
                    let c = dt.clone() * &self.w[(j, l)] * &self.b[(l, i)];
                    if c.is_zero() {
                        continue;
                    }
                    for r in 0..n {
                        for s in 0..n {
                            let t = c.clone() * &jac[(r, s)];
                            m[(j * n + r, (i - 1) * n + s)] -= t;
                        }
                    }
                }
            }
        }
        m
    }

    /// Maps from `X_0` to each nodal value `X_0..X_q` for the linear system
    /// `y' = A_l y` (with `A_l` given at the quadrature points).
    pub fn linear_maps(&self, dt: &R, mats: &[Matrix<R>], interval: usize) -> Result<Vec<Matrix<R>>> {
        let n = mats[0].rows();
        let q = self.q;
        let ctx = dt.context();
        let lu = self.system_matrix(dt, mats).lu().map_err(|_| Error::Singular { interval: Some(interval) })?;
        // Right-hand side for column c: (I + Δt Σ_l W_jl B_l0 A_l) e_c.
        let mut cols: Vec<Vector<R>> = Vec::with_capacity(n);
        for c in 0..n {
            let mut rhs = Vector::zeros(q * n, &ctx);
            for j in 0..q {
                rhs[j * n + c] = R::one(&ctx);
                for (l, a) in mats.iter().enumerate() {
                    let coef = dt.clone() * &self.w[(j, l)] * &self.b[(l, 0)];
                    for r in 0..n {
                        rhs[j * n + r] += coef.clone() * &a[(r, c)];
                    }
                }
            }
            cols.push(lu.solve(&rhs));
        }
        let mut maps = vec![Matrix::identity(n, &ctx)];
        for j in 0..q {
            let mut m = Matrix::zeros(n, n, &ctx);
            for (c, col) in cols.iter().enumerate() {
                for r in 0..n {
                    m[(r, c)] = col[j * n + r].clone();
                }
            }
            maps.push(m);
        }
        Ok(maps)
    }
}

/// Step layout for a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Steps<R> {
    Uniform(R),
    Nodes(Partition<R>),
}

/// Settings for [`solve_cg`].
#[derive(Debug, Clone)]
pub struct SolverConfig<R> {
    pub q: usize,
    pub steps: Steps<R>,
    /// Stopping tolerance for the nonlinear iteration, relative to `1 + ‖U‖∞`.
    pub tol: R,
    pub max_iterations: usize,
    /// Fixed-point iterations tried before switching to Newton.
    pub newton_after: usize,
    pub quadrature_points: usize,
    pub ctx: PrecisionContext,
}

impl<R: Real> SolverConfig<R> {
    /// Defaults: `tol = 10 eps`, `q + 2` quadrature points, Newton after 4
    /// fixed-point sweeps.
    pub fn new(q: usize, dt: R, ctx: &PrecisionContext) -> Self {
        Self {
            q,
            steps: Steps::Uniform(dt),
            tol: ctx.eps::<R>() * R::from_i64(10, ctx),
            max_iterations: 100,
            newton_after: 4,
            quadrature_points: q + 2,
            ctx: *ctx,
        }
    }

    pub fn with_partition(mut self, partition: Partition<R>) -> Self {
        self.steps = Steps::Nodes(partition);
        self
    }

    pub fn with_tol(mut self, tol: R) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_quadrature_points(mut self, n: usize) -> Self {
        self.quadrature_points = n;
        self
    }

    pub fn with_newton_after(mut self, n: usize) -> Self {
        self.newton_after = n;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        R::check_context(&self.ctx)?;
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if self.tol < self.ctx.eps::<R>() {
            return Err(Error::Config(format!("tolerance {} is below unit roundoff", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if let Steps::Uniform(dt) = &self.steps {
            if !(dt > &R::zero(&self.ctx)) {
                return Err(Error::Config(format!("time step must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    /// The partition of `[0, end]` this configuration describes.
    pub fn partition(&self, end: &R) -> Result<Partition<R>> {
        if !(end > &R::zero(&self.ctx)) {
            return Err(Error::Config(format!("final time must be positive, got {end}")));
        }
        match &self.steps {
            Steps::Uniform(dt) => Partition::with_step(end, dt, &self.ctx),
            Steps::Nodes(p) => {
                if !p.start().is_zero() || p.end() != end {
                    return Err(Error::Horizon(format!(
                        "partition covers [{}, {}], requested [0, {end}]",
                        p.start(),
                        p.end()
                    )));
                }
                Ok(p.clone())
            }
        }
    }
}

/// Iteration counts of a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub fixed_point_iterations: usize,
    pub newton_iterations: usize,
    /// Largest final update over all intervals, relative to `1 + ‖U‖∞`.
    pub max_final_update: f64,
}

/// Piecewise-polynomial numerical solution with its provenance.
#[derive(Debug, Clone)]
pub struct Trajectory<R> {
    poly: PiecewisePolynomial<R>,
    label: String,
    ctx: PrecisionContext,
    stats: SolveStats,
}

impl<R: Real> Trajectory<R> {
    pub fn new(poly: PiecewisePolynomial<R>, label: impl Into<String>, ctx: &PrecisionContext) -> Self {
        Self { poly, label: label.into(), ctx: *ctx, stats: SolveStats::default() }
    }

    /// Trajectory given by nodal values on each interval; neighbouring
    /// intervals need not agree, so discontinuous approximations are allowed.
    pub fn from_nodal(
        partition: Partition<R>,
        basis: BasisSpec<R>,
        values: Vec<Vec<Vector<R>>>,
        label: impl Into<String>,
        ctx: &PrecisionContext,
    ) -> Result<Self> {
        Ok(Self::new(PiecewisePolynomial::new(partition, basis, values)?, label, ctx))
    }

    pub fn poly(&self) -> &PiecewisePolynomial<R> {
        &self.poly
    }

    pub fn partition(&self) -> &Partition<R> {
        self.poly.partition()
    }

    pub fn basis(&self) -> &BasisSpec<R> {
        self.poly.basis()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ctx(&self) -> &PrecisionContext {
        &self.ctx
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn values(&self) -> &[Vec<Vector<R>>] {
        self.poly.values()
    }

    pub fn end(&self) -> &R {
        self.partition().end()
    }

    pub fn evaluate(&self, t: &R) -> Result<Vector<R>> {
        self.poly.evaluate(t)
    }

    pub fn evaluate_derivative(&self, t: &R, order: usize) -> Result<Vector<R>> {
        self.poly.evaluate_derivative(t, order)
    }

    /// `U(0^+)`.
    pub fn initial_value(&self) -> Vector<R> {
        self.poly.right_limit(0)
    }

    /// `U(T)`.
    pub fn final_value(&self) -> Vector<R> {
        self.poly.left_limit(self.partition().len() - 1)
    }

    /// `[U]` at the left end of interval `m`; zero for `m = 0`.
    pub fn jump(&self, m: usize) -> Vector<R> {
        self.poly.jump(m)
    }
}

/// Stateful cG(q) stepper.
#[derive(Debug, Clone)]
pub struct CgSolver<R> {
    config: SolverConfig<R>,
    scheme: CgScheme<R>,
}

impl<R: Real> CgSolver<R> {
    pub fn new(config: SolverConfig<R>) -> Result<Self> {
        config.validate()?;
        let scheme = CgScheme::new(config.q, config.quadrature_points, &config.ctx)?;
        Ok(Self { config, scheme })
    }

    pub fn scheme(&self) -> &CgScheme<R> {
        &self.scheme
    }

    pub fn config(&self) -> &SolverConfig<R> {
        &self.config
    }

    /// Solves the nodal system on one interval starting from `u0`.
    pub fn step(
        &self,
        problem: &dyn Problem<R>,
        interval: usize,
        t0: &R,
        dt: &R,
        u0: &Vector<R>,
        stats: &mut SolveStats,
    ) -> Result<Vec<Vector<R>>> {
        let cfg = &self.config;
        let q = cfg.q;
        let n = u0.dim();
        let times: Vec<R> = self.scheme.rule.points().iter().map(|s| t0.clone() + dt.clone() * s).collect();
        let mut xs = vec![u0.clone(); q + 1];
        let mut newton = cfg.newton_after == 0;
        let mut prev: Option<R> = None;
        let mut last = R::zero(&cfg.ctx);
        for it in 1..=cfg.max_iterations {
            let ys = self.scheme.at_points(&xs);
            let fs: Vec<Vector<R>> = ys.iter().zip(&times).map(|(y, t)| problem.rhs(y, t)).collect();
            let next = self.scheme.update(u0, dt, &fs);
            let d = if newton {
                stats.newton_iterations += 1;
                let jacs: Vec<Matrix<R>> = ys.iter().zip(&times).map(|(y, t)| problem.jacobian(y, t)).collect();
                let mut g = Vector::zeros(q * n, &cfg.ctx);
                for j in 0..q {
                    for r in 0..n {
                        g[j * n + r] = xs[j + 1][r].clone() - &next[j][r];
                    }
                }
                let lu = self
                    .scheme
                    .system_matrix(dt, &jacs)
                    .lu()
                    .map_err(|_| Error::Singular { interval: Some(interval) })?;
                let delta = lu.solve(&g);
                for j in 0..q {
                    for r in 0..n {
                        xs[j + 1][r] -= &delta[j * n + r];
                    }
                }
                delta.norm_inf()
            } else {
                stats.fixed_point_iterations += 1;
                let mut d = R::zero(&cfg.ctx);
                for (x, y) in xs.iter_mut().skip(1).zip(next) {
                    d = d.max_of((&y - x).norm_inf());
                    *x = y;
                }
                d
            };
            if !d.is_finite() || xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonConvergence { interval, iterations: it, last_update: d.to_decimal() });
            }
            let mut scale = R::one(&cfg.ctx);
            for x in &xs {
                scale = scale.max_of(R::one(&cfg.ctx) + x.norm_inf());
            }
            let bound = cfg.tol.clone() * &scale;
            let floor_hit = newton
                && prev.as_ref().is_some_and(|p| &d >= p)
                && d <= bound.clone() * R::from_i64(100, &cfg.ctx);
            if d <= bound || floor_hit {
                let rel = (d / scale).to_f64();
                stats.max_final_update = stats.max_final_update.max(rel);
                return Ok(xs);
            }
            if !newton {
                let grew = prev.as_ref().is_some_and(|p| &d > p);
                if grew {
                    xs = vec![u0.clone(); q + 1];
                }
                if grew || it >= cfg.newton_after {
                    newton = true;
                    prev = None;
                    last = d;
                    continue;
                }
            }
            prev = Some(d.clone());
            last = d;
        }
        Err(Error::NonConvergence { interval, iterations: cfg.max_iterations, last_update: last.to_decimal() })
    }

    /// Steps through `partition`, continuing after any intervals already in
    /// `done`. `observer` sees each new interval's nodal values.
    pub fn solve_from(
        &self,
        problem: &dyn Problem<R>,
        partition: &Partition<R>,
        mut done: Vec<Vec<Vector<R>>>,
        mut observer: impl FnMut(usize, &[Vector<R>]) -> Result<()>,
    ) -> Result<Trajectory<R>> {
        let u0 = problem.initial();
        u0.check_dim(problem.dim())?;
        if done.len() > partition.len() {
            return Err(Error::Horizon(format!(
                "{} stored intervals exceed the {} of the partition",
                done.len(),
                partition.len()
            )));
        }
        let mut stats = SolveStats::default();
        let mut start = match done.last() {
            Some(last) => last.last().expect("nonempty interval").clone(),
            None => u0,
        };
        for m in done.len()..partition.len() {
            let xs = self.step(problem, m, partition.left(m), &partition.width(m), &start, &mut stats)?;
            observer(m, &xs)?;
            start = xs[self.config.q].clone();
            done.push(xs);
        }
        let poly = PiecewisePolynomial::new(partition.clone(), self.scheme.basis.clone(), done)?;
        let mut traj = Trajectory::new(poly, problem.label(), &self.config.ctx);
        traj.stats = stats;
        Ok(traj)
    }
}

/// Solves `problem` on `[0, end]` with cG(q).
pub fn solve_cg<R: Real>(problem: &dyn Problem<R>, config: &SolverConfig<R>, end: &R) -> Result<Trajectory<R>> {
    let solver = CgSolver::new(config.clone())?;
    let partition = config.partition(end)?;
    solver.solve_from(problem, &partition, Vec::new(), |_, _| Ok(()))
}

/// `U(t)`.
pub fn evaluate<R: Real>(traj: &Trajectory<R>, t: &R) -> Result<Vector<R>> {
    traj.evaluate(t)
}

/// `U^{(order)}(t)`.
pub fn evaluate_derivative<R: Real>(traj: &Trajectory<R>, t: &R, order: usize) -> Result<Vector<R>> {
    traj.evaluate_derivative(t, order)
}
