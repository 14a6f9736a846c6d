//! Solve, estimate, sweep and Monte-Carlo pipelines behind the command line.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, McDual};
use super::store::{decode_rows, read_trajectory_file, TrajectoryHeader, TrajectoryWriter};
use crate::adjoint::{
    default_factor_rule, growth_profile, short, testing_basis, DualConfig, DualPropagator, DualSolution, GrowthPoint,
    ProfilePoint, StabilityFactors,
};
use crate::discretization::{lagrange_basis, NodeFamily, Partition, PiecewisePolynomial, QuadratureRule};
use crate::error::{Error, Result};
use crate::estimator::{
    assemble_bounds, dual_at_testing_nodes, error_representation, estimate_quadrature_error, predict_computability,
    predict_optimal_dt, BoundInputs, BreakdownReport,
};
use crate::fit::{line_fit, LineFit};
use crate::numerics::{BigFloat, PrecisionContext, Real, Vector};
use crate::primal::{CgSolver, SolverConfig, Trajectory};
use crate::problems::Problem;
use crate::residual::{default_rule, discrete_residual, residual_ceiling};
use crate::stochastic::{flatten_weights, rms_scaling_sweep, simulate_ec, NoiseModel, RmsSweep};

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const INDEX_FILE: &str = "results.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionInfo {
    pub digits: u32,
    pub bits: u32,
    pub log10_eps: f64,
    pub backend: &'static str,
}

/// Working context for `digits` under the configured backend.
pub fn context_for(cfg: &ExperimentConfig, digits: u32) -> Result<(PrecisionContext, bool)> {
    if cfg.backend.uses_f64(digits) {
        Ok((PrecisionContext::ieee_double(), true))
    } else {
        Ok((PrecisionContext::new(digits)?, false))
    }
}

fn precision_info(ctx: &PrecisionContext, native: bool) -> PrecisionInfo {
    PrecisionInfo {
        digits: ctx.digits(),
        bits: ctx.bits(),
        log10_eps: ctx.log10_eps(),
        backend: if native { "f64" } else { "mpfr" },
    }
}

/// Provenance and outcome of one command.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub wall_clock_secs: f64,
    pub precision: PrecisionInfo,
    pub artifacts: Vec<String>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub headline: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_error: Option<String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Clock {
    started: u64,
    t0: Instant,
}

impl Clock {
    fn start() -> Self {
        Self { started: unix_now(), t0: Instant::now() }
    }

    fn record(&self, command: &str, cfg: &ExperimentConfig, precision: PrecisionInfo) -> RunRecord {
        RunRecord {
            command: command.into(),
            config_hash: cfg.hash(),
            started_unix: self.started,
            finished_unix: unix_now(),
            wall_clock_secs: self.t0.elapsed().as_secs_f64(),
            precision,
            artifacts: Vec::new(),
            status: "ok".into(),
            headline: None,
            measured_error: None,
        }
    }
}

/// Writes `record` to `<out>/<command>.run.json` and appends it to the index.
pub fn persist_record(out: &Path, record: &RunRecord) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{}.run.json", record.command)), serde_json::to_string_pretty(record)?)?;
    let mut index = OpenOptions::new().create(true).append(true).open(out.join(INDEX_FILE))?;
    writeln!(index, "{}", serde_json::to_string(record)?)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Rough wall-clock estimate in seconds for `intervals` steps; `passes`
/// counts the solve plus any dual solves.
pub fn estimate_seconds(dim: usize, q: usize, intervals: usize, ctx: &PrecisionContext, native: bool, passes: usize) -> f64 {
    let per_op = if native { 1e-8 } else { 4e-8 * (ctx.bits() as f64 / 64.0).powf(1.5) };
    let (n, q) = (dim as f64, q as f64);
    let step = 8.0 * (q + 2.0) * (n * n + q * n) + (q * n).powi(3) / 3.0;
    per_op * step * intervals as f64 * passes as f64
}

fn estimate_stage_seconds(cfg: &ExperimentConfig, dim: usize, q: usize, intervals: usize, ctx: &PrecisionContext, native: bool) -> Result<f64> {
    let comps = cfg.zt.components(dim)?.len();
    let mut seconds = estimate_seconds(dim, q, intervals, ctx, native, 2 + comps);
    if cfg.growth_stride > 0 {
        seconds *= 1.0 + (intervals / cfg.growth_stride) as f64 * dim as f64 / 4.0;
    }
    Ok(seconds)
}

/// Estimated seconds for solving the first grid point of `cfg` and running
/// the estimator on it. Above `long_threshold` the config is long-running.
pub fn pipeline_seconds(cfg: &ExperimentConfig) -> Result<f64> {
    let (q, digits) = (cfg.q[0], cfg.digits[0]);
    let (ctx, native) = context_for(cfg, digits)?;
    let dim = cfg.problem.build::<f64>(&cfg.mu, &PrecisionContext::ieee_double())?.dim();
    let m = intervals_for(cfg.end_f64(), cfg.dt[0].parse().map_err(|_| Error::Config(format!("bad dt '{}'", cfg.dt[0])))?);
    Ok(estimate_seconds(dim, q, m, &ctx, native, 1) + estimate_stage_seconds(cfg, dim, q, m, &ctx, native)?)
}

pub fn is_long_running(cfg: &ExperimentConfig) -> Result<bool> {
    Ok(pipeline_seconds(cfg)? > cfg.long_threshold)
}

fn guard(cfg: &ExperimentConfig, seconds: f64, confirm_long: bool) -> Result<()> {
    if seconds > cfg.long_threshold && !confirm_long {
        return Err(Error::LongRunning { estimate: seconds, threshold: cfg.long_threshold });
    }
    Ok(())
}

fn intervals_for(end: f64, dt: f64) -> usize {
    (end / dt).round().max(1.0) as usize
}

fn solver_config<R: Real>(cfg: &ExperimentConfig, q: usize, dt: &str, ctx: &PrecisionContext) -> Result<SolverConfig<R>> {
    let mut sc = SolverConfig::new(q, R::parse(dt, ctx)?, ctx);
    if let Some(tol) = &cfg.tol {
        sc = sc.with_tol(R::parse(tol, ctx)?);
    }
    Ok(sc)
}

/// Solves at one grid point, optionally streaming intervals to `store`.
fn solve_generic<R: Real>(
    cfg: &ExperimentConfig,
    q: usize,
    dt: &str,
    ctx: &PrecisionContext,
    store: Option<&Path>,
) -> Result<Trajectory<R>> {
    let problem = cfg.problem.build::<R>(&cfg.mu, ctx)?;
    let sc = solver_config::<R>(cfg, q, dt, ctx)?;
    let end = R::parse(&cfg.end, ctx)?;
    let partition = sc.partition(&end)?;
    let solver = CgSolver::new(sc)?;
    match store {
        None => solver.solve_from(problem.as_ref(), &partition, Vec::new(), |_, _| Ok(())),
        Some(path) => {
            let header = TrajectoryHeader {
                label: problem.label().to_string(),
                config_hash: cfg.hash(),
                q,
                digits: ctx.digits(),
                bits: ctx.bits(),
                dim: problem.dim(),
                intervals: partition.len(),
                end: cfg.end.clone(),
            };
            let (mut writer, rows) = TrajectoryWriter::open(path, &header)?;
            let done = decode_rows(&header, &rows, &partition, ctx)?;
            solver.solve_from(problem.as_ref(), &partition, done, |m, xs| {
                writer.append(m, partition.left(m), partition.right(m), xs)
            })
        }
    }
}

/// Solves the first grid point of `cfg` into `<out>/trajectory.txt`,
/// resuming a partial file written by the same config. The long-running
/// guard covers the whole solve plus estimate pipeline the config implies.
pub fn cmd_solve(cfg: &ExperimentConfig, confirm_long: bool) -> Result<RunRecord> {
    let clock = Clock::start();
    let (q, dt, digits) = (cfg.q[0], cfg.dt[0].clone(), cfg.digits[0]);
    let (ctx, native) = context_for(cfg, digits)?;
    let m = intervals_for(cfg.end_f64(), dt.parse().expect("validated"));
    guard(cfg, pipeline_seconds(cfg)?, confirm_long)?;
    let path = cfg.out.join(TRAJECTORY_FILE);
    fn summary<R: Real>(t: Trajectory<R>) -> (Vec<String>, crate::primal::SolveStats) {
        (t.final_value().iter().map(Real::to_decimal).collect(), t.stats().clone())
    }
    // Stats cover only the intervals solved by this invocation.
    let (final_value, stats) = if native {
        summary(solve_generic::<f64>(cfg, q, &dt, &ctx, Some(&path))?)
    } else {
        summary(solve_generic::<BigFloat>(cfg, q, &dt, &ctx, Some(&path))?)
    };
    let mut rec = clock.record("solve", cfg, precision_info(&ctx, native));
    rec.artifacts.push(TRAJECTORY_FILE.into());
    rec.headline = Some(serde_json::json!({ "intervals": m, "final_value": final_value, "stats": stats }));
    persist_record(&cfg.out, &rec)?;
    Ok(rec)
}

fn load_trajectory<R: Real>(
    cfg: &ExperimentConfig,
    header: &TrajectoryHeader,
    rows: &[super::store::StoredInterval],
    ctx: &PrecisionContext,
) -> Result<Trajectory<R>> {
    let sc = solver_config::<R>(cfg, header.q, &cfg.dt[0], ctx)?;
    let partition = sc.partition(&R::parse(&cfg.end, ctx)?)?;
    let values = decode_rows(header, rows, &partition, ctx)?;
    if values.len() != partition.len() {
        return Err(Error::Stale(format!(
            "trajectory holds {} of {} intervals; rerun solve to finish it",
            values.len(),
            partition.len()
        )));
    }
    let basis = lagrange_basis(header.q, NodeFamily::Lobatto, ctx)?;
    Trajectory::from_nodal(partition, basis, values, header.label.clone(), ctx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub max_jump: String,
    pub max_residual: String,
    pub max_discrete: String,
    pub max_scaled_discrete: String,
    pub galerkin_summary: String,
    pub roundoff_ceiling: String,
    pub ceiling_exceeded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub component: usize,
    pub bounds: BreakdownReport,
    pub representation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_error: Option<String>,
    pub quadrature_s_q: String,
    pub quadrature_max_defect: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub from: f64,
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Predictions {
    pub optimal_dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub computability_horizon: Option<f64>,
    /// Exponent of `Δt` expected at nodes (`2q`) and in the residual bound (`p + 1`).
    pub nodal_order: usize,
    pub bound_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub config_hash: String,
    pub problem: String,
    pub precision: PrecisionInfo,
    #[serde(rename = "T")]
    pub end: String,
    pub q: usize,
    pub p: usize,
    pub intervals: usize,
    pub dual_degree: usize,
    pub jacobian_policy: String,
    pub trajectory: String,
    pub residual: ResidualSummary,
    pub components: Vec<ComponentReport>,
    /// Component with the largest total bound.
    pub headline_component: usize,
    pub headline_total: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthFit>,
    pub predictions: Predictions,
}

fn max_profile<R: Real>(all: &[StabilityFactors<R>]) -> Vec<ProfilePoint<R>> {
    let mut out = all[0].profile.clone();
    for sf in &all[1..] {
        for (a, b) in out.iter_mut().zip(&sf.profile) {
            a.s_d = a.s_d.clone().max_of(b.s_d.clone());
            a.s_g = a.s_g.clone().max_of(b.s_g.clone());
            a.s_c = a.s_c.clone().max_of(b.s_c.clone());
            a.s_c2 = a.s_c2.clone().max_of(b.s_c2.clone());
        }
    }
    out
}

fn write_growth_csv<R: Real>(path: &Path, curve: &[GrowthPoint<R>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = curve.first().map_or(0, |g| g.components.len());
    let cols: Vec<String> = (0..n).map(|i| format!("S_C_{i}")).collect();
    writeln!(out, "T,S_C_max,{}", cols.join(","))?;
    for g in curve {
        let comps: Vec<String> = g.components.iter().map(short).collect();
        writeln!(out, "{},{},{}", short(&g.t), short(&g.max()), comps.join(","))?;
    }
    Ok(())
}

/// Rate of `log10 S_C` growth over final times `≥ from`.
pub fn fit_growth<R: Real>(curve: &[GrowthPoint<R>], from: f64) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> =
        curve.iter().filter(|g| g.t.to_f64() >= from).map(|g| (g.t.to_f64(), g.max().log10_abs())).collect();
    line_fit(&pts)
}

fn estimate_generic<R: Real>(
    cfg: &ExperimentConfig,
    header: &TrajectoryHeader,
    rows: &[super::store::StoredInterval],
    ctx: &PrecisionContext,
    native: bool,
    traj_name: &str,
) -> Result<EstimateReport> {
    let out = &cfg.out;
    let traj = load_trajectory::<R>(cfg, header, rows, ctx)?;
    let problem: Box<dyn Problem<R>> = cfg.problem.build(&cfg.mu, ctx)?;
    let problem = problem.as_ref();
    let (q, p) = (traj.degree(), cfg.testing_degree(traj.degree()));
    let basis = testing_basis::<R>(p, ctx)?;
    let residual = discrete_residual(&traj, problem, &basis, &default_rule(q, p, ctx)?)?;
    let mut dcfg = DualConfig::for_testing_degree(p);
    if let Some(d) = cfg.dual_degree {
        dcfg = dcfg.with_degree(d);
    }
    let prop = DualPropagator::new(&traj, problem, &dcfg)?;
    let factor_rule = default_factor_rule::<R>(dcfg.degree, ctx)?;
    let bound_rule = QuadratureRule::<R>::gauss_legendre(q + dcfg.degree + 2, ctx)?;
    let comps = cfg.zt.components(traj.dim())?;
    let end = traj.end().clone();
    let exact_end = problem.exact(&end);

    let mut reports = Vec::new();
    let mut all_sf = Vec::new();
    let mut totals = Vec::new();
    for &i in &comps {
        let zt = Vector::unit(traj.dim(), i, ctx);
        let dual = prop.solve(&zt)?;
        let sf = crate::adjoint::stability_factors(&dual, &basis, &factor_rule)?;
        let quad = estimate_quadrature_error(&dual, problem, &traj, &basis, residual.samples_per_interval)?;
        let bounds = assemble_bounds(&BoundInputs {
            traj: &traj,
            problem,
            dual: &dual,
            residual: &residual,
            factors: &sf,
            data_error: R::zero(ctx),
            rule: &bound_rule,
            e_q: Some(quad.bound.clone()),
        })?;
        let rep = error_representation(&traj, &dual, problem, &bound_rule, Some(&problem.initial()))?;
        let true_error = exact_end.as_ref().map(|u| (traj.final_value()[i].clone() - &u[i]).to_decimal());
        let mut f = BufWriter::new(File::create(out.join(format!("profile_{i}.csv")))?);
        sf.write_profile_csv(&mut f)?;
        totals.push(bounds.total());
        reports.push(ComponentReport {
            component: i,
            bounds: bounds.report(),
            representation: rep.total().to_decimal(),
            true_error,
            quadrature_s_q: quad.s_q.to_decimal(),
            quadrature_max_defect: quad.max_defect.to_decimal(),
        });
        all_sf.push(sf);
    }
    let headline = totals
        .iter()
        .enumerate()
        .fold(0, |best, (k, t)| if *t > totals[best] { k } else { best });
    let merged = StabilityFactors { profile: max_profile(&all_sf), ..all_sf[headline].clone() };
    merged.write_profile_csv(BufWriter::new(File::create(out.join("profile.csv"))?))?;
    residual.write_csv(BufWriter::new(File::create(out.join("residual.csv"))?))?;

    let growth = if cfg.growth_stride > 0 {
        let curve = growth_profile(&prop, &basis, &factor_rule, cfg.growth_stride)?;
        write_growth_csv(&out.join("growth.csv"), &curve)?;
        let from = match &cfg.growth_from {
            Some(s) => s.parse().map_err(|_| Error::Config(format!("bad growth_from '{s}'")))?,
            None => cfg.end_f64() / 6.0,
        };
        fit_growth(&curve, from).map(|f| GrowthFit { from, rate: f.slope, intercept: f.intercept, r2: f.r2, points: f.points })
    } else {
        None
    };
    let ceiling = residual_ceiling(&residual, ctx, traj.dim());
    Ok(EstimateReport {
        config_hash: cfg.hash(),
        problem: cfg.problem.to_string(),
        precision: precision_info(ctx, native),
        end: cfg.end.clone(),
        q,
        p,
        intervals: traj.partition().len(),
        dual_degree: dcfg.degree,
        jacobian_policy: dcfg.policy.to_string(),
        trajectory: traj_name.to_string(),
        residual: ResidualSummary {
            max_jump: residual.max_jump().to_decimal(),
            max_residual: residual.max_residual().to_decimal(),
            max_discrete: residual.max_discrete().to_decimal(),
            max_scaled_discrete: residual.max_scaled_discrete().to_decimal(),
            galerkin_summary: residual.galerkin_summary().to_decimal(),
            roundoff_ceiling: ceiling.ceiling.to_decimal(),
            ceiling_exceeded: ceiling.exceeded,
        },
        headline_component: comps[headline],
        headline_total: totals[headline].to_decimal(),
        components: reports,
        predictions: Predictions {
            optimal_dt: predict_optimal_dt(q, ctx)?,
            computability_horizon: match &growth {
                Some(g) if g.rate > 0.0 => Some(predict_computability(ctx, g.rate)?),
                _ => None,
            },
            nodal_order: 2 * q,
            bound_order: p + 1,
        },
        growth,
    })
}

/// Residuals, duals for every configured terminal vector, stability
/// profiles and bounds for a stored trajectory. Writes `estimate.json`,
/// `profile*.csv`, `residual.csv` and, when enabled, `growth.csv`.
pub fn cmd_estimate(cfg: &ExperimentConfig, trajectory: &Path, confirm_long: bool) -> Result<RunRecord> {
    let clock = Clock::start();
    let (header, rows) = read_trajectory_file(trajectory)?;
    if header.config_hash != cfg.hash() {
        return Err(Error::Stale(format!(
            "{} was produced by config {} but the current config hashes to {}",
            trajectory.display(),
            header.config_hash,
            cfg.hash()
        )));
    }
    let ctx = header.context()?;
    let native = ctx.bits() == 53;
    let seconds = estimate_stage_seconds(cfg, header.dim, header.q, header.intervals, &ctx, native)?;
    guard(cfg, seconds, confirm_long)?;
    fs::create_dir_all(&cfg.out)?;
    let name = trajectory.file_name().map_or_else(|| "trajectory".into(), |n| n.to_string_lossy().into_owned());
    let report = if native {
        estimate_generic::<f64>(cfg, &header, &rows, &ctx, native, &name)?
    } else {
        estimate_generic::<BigFloat>(cfg, &header, &rows, &ctx, native, &name)?
    };
    write_json(&cfg.out.join("estimate.json"), &report)?;
    let mut rec = clock.record("estimate", cfg, report.precision);
    rec.artifacts = vec!["estimate.json".into(), "profile.csv".into(), "residual.csv".into()];
    if report.growth.is_some() {
        rec.artifacts.push("growth.csv".into());
    }
    rec.headline = Some(serde_json::json!({
        "component": report.headline_component,
        "total_bound": report.headline_total,
        "growth_rate": report.growth.as_ref().map(|g| g.rate),
    }));
    rec.measured_error = report.components.iter().find(|c| c.component == report.headline_component).and_then(|c| c.true_error.clone());
    persist_record(&cfg.out, &rec)?;
    Ok(rec)
}

/// Final value at a point, as decimal strings.
fn final_decimal(cfg: &ExperimentConfig, q: usize, dt: &str, digits: u32) -> Result<Vec<String>> {
    let (ctx, native) = context_for(cfg, digits)?;
    let v: Vec<String> = if native {
        solve_generic::<f64>(cfg, q, dt, &ctx, None)?.final_value().iter().map(Real::to_decimal).collect()
    } else {
        solve_generic::<BigFloat>(cfg, q, dt, &ctx, None)?.final_value().iter().map(Real::to_decimal).collect()
    };
    Ok(v)
}

fn max_diff(a: &[String], b: &[BigFloat], ctx: &PrecisionContext) -> Result<BigFloat> {
    let mut worst = BigFloat::zero(ctx);
    for (x, y) in a.iter().zip(b) {
        worst = worst.max_of((BigFloat::parse(x, ctx)? - y).abs());
    }
    Ok(worst)
}

/// One solve of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSample {
    pub q: usize,
    pub digits: u32,
    /// Nominal step of the grid point.
    pub dt: f64,
    /// Step actually used (nominal step jittered for averaging).
    pub dt_used: String,
    pub error: Option<String>,
    pub log10_error: Option<f64>,
    pub status: String,
}

/// Trial-averaged error at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub q: usize,
    pub digits: u32,
    pub dt: f64,
    pub mean_error: f64,
    pub ok: usize,
}

/// Regime fits for one `(q, digits)` curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurveFit {
    pub q: usize,
    pub digits: u32,
    pub best_dt: f64,
    pub best_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discretisation_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roundoff_slope: Option<f64>,
    pub predicted_optimal_dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub reference: ReferenceInfo,
    pub samples: Vec<SweepSample>,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<CurveFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub digits: u32,
    pub q: usize,
    pub dt: String,
    /// Difference to the same reference recipe at twice the step.
    pub self_check: String,
}

fn jittered(dt: f64, k: usize, n: usize, spread: f64) -> f64 {
    if n == 1 {
        return dt;
    }
    let x = 2.0 * k as f64 / (n - 1) as f64 - 1.0;
    dt * (1.0 + spread * x)
}

/// Splits a curve at its minimum and fits each side in log-log coordinates.
pub fn regime_fits(points: &[(f64, f64)]) -> (usize, Option<f64>, Option<f64>) {
    let valid: Vec<(f64, f64)> = points.iter().copied().filter(|(_, e)| e.is_finite() && *e > 0.0).collect();
    let Some(best) = (0..valid.len()).min_by(|&a, &b| valid[a].1.total_cmp(&valid[b].1)) else {
        return (0, None, None);
    };
    let log = |v: &[(f64, f64)]| v.iter().map(|(d, e)| (d.log10(), e.log10())).collect::<Vec<_>>();
    let (bd, _) = valid[best];
    let above: Vec<_> = valid.iter().copied().filter(|(d, _)| *d > bd).collect();
    let below: Vec<_> = valid.iter().copied().filter(|(d, _)| *d < bd).collect();
    let best_index = points.iter().position(|p| p.0 == bd).unwrap_or(0);
    (best_index, line_fit(&log(&above)).map(|f| f.slope), line_fit(&log(&below)).map(|f| f.slope))
}

/// Error at final time over the `(q, digits, dt)` grid against one shared
/// high-precision reference.
pub fn cmd_sweep(cfg: &ExperimentConfig, confirm_long: bool) -> Result<SweepReport> {
    let clock = Clock::start();
    let grid: Vec<(usize, u32, f64)> = cfg
        .q
        .iter()
        .flat_map(|&q| cfg.digits.iter().flat_map(move |&d| cfg.dt.iter().map(move |dt| (q, d, dt.parse::<f64>().expect("validated")))))
        .collect();
    if grid.len() < 2 {
        return Err(Error::Config("a sweep needs at least two grid points".into()));
    }
    let end = cfg.end_f64();
    let dim = cfg.problem.build::<f64>(&cfg.mu, &PrecisionContext::ieee_double())?.dim();
    let ref_digits = cfg.ref_digits.unwrap_or(2 * cfg.digits.iter().max().copied().unwrap_or(16));
    let ref_q = cfg.ref_degree.unwrap_or(cfg.q.iter().max().copied().unwrap_or(1) + 2);
    let min_dt = grid.iter().map(|g| g.2).fold(f64::INFINITY, f64::min);
    let ref_dt = cfg.ref_dt.clone().unwrap_or_else(|| format!("{:e}", min_dt / 2.0));
    let ref_ctx = PrecisionContext::new(ref_digits)?;
    let ref_dt_f: f64 = ref_dt.parse().map_err(|_| Error::Config(format!("bad ref_dt '{ref_dt}'")))?;

    let mut seconds = 1.5 * estimate_seconds(dim, ref_q, intervals_for(end, ref_dt_f), &ref_ctx, false, 1);
    for &(q, d, dt) in &grid {
        let (ctx, native) = context_for(cfg, d)?;
        seconds += cfg.nearby as f64 * estimate_seconds(dim, q, intervals_for(end, dt), &ctx, native, 1);
    }
    guard(cfg, seconds / rayon::current_num_threads() as f64, confirm_long)?;

    let mut ref_cfg = cfg.clone();
    ref_cfg.backend = super::config::Backend::Mpfr;
    ref_cfg.tol = None;
    let reference = final_decimal(&ref_cfg, ref_q, &ref_dt, ref_digits)?;
    let reference: Vec<BigFloat> = reference.iter().map(|s| BigFloat::parse(s, &ref_ctx)).collect::<Result<_>>()?;
    let check = final_decimal(&ref_cfg, ref_q, &format!("{:e}", 2.0 * ref_dt_f), ref_digits)?;
    let self_check = max_diff(&check, &reference, &ref_ctx)?;

    let jobs: Vec<(usize, u32, f64, f64)> = grid
        .iter()
        .flat_map(|&(q, d, dt)| (0..cfg.nearby).map(move |k| (q, d, dt, k as f64)))
        .map(|(q, d, dt, k)| (q, d, dt, jittered(dt, k as usize, cfg.nearby, cfg.spread)))
        .collect();
    let samples: Vec<SweepSample> = jobs
        .par_iter()
        .map(|&(q, digits, dt, used)| {
            let used_s = format!("{used:e}");
            let outcome = final_decimal(cfg, q, &used_s, digits).and_then(|v| max_diff(&v, &reference, &ref_ctx));
            match outcome {
                Ok(e) => SweepSample {
                    q,
                    digits,
                    dt,
                    dt_used: used_s,
                    log10_error: Some(e.log10_abs()),
                    error: Some(short(&e)),
                    status: "ok".into(),
                },
                Err(err) => SweepSample { q, digits, dt, dt_used: used_s, error: None, log10_error: None, status: err.to_string() },
            }
        })
        .collect();

    let mut points = Vec::new();
    for &(q, digits, dt) in &grid {
        let errs: Vec<f64> = samples
            .iter()
            .filter(|s| s.q == q && s.digits == digits && s.dt == dt)
            .filter_map(|s| s.log10_error.map(|l| 10f64.powf(l)))
            .collect();
        let mean = if errs.is_empty() { f64::NAN } else { errs.iter().sum::<f64>() / errs.len() as f64 };
        points.push(SweepPoint { q, digits, dt, mean_error: mean, ok: errs.len() });
    }
    let mut fits = Vec::new();
    for &q in &cfg.q {
        for &digits in &cfg.digits {
            let curve: Vec<(f64, f64)> =
                points.iter().filter(|p| p.q == q && p.digits == digits).map(|p| (p.dt, p.mean_error)).collect();
            let (best, disc, round) = regime_fits(&curve);
            let (ctx, _) = context_for(cfg, digits)?;
            fits.push(CurveFit {
                q,
                digits,
                best_dt: curve.get(best).map_or(f64::NAN, |c| c.0),
                best_error: curve.get(best).map_or(f64::NAN, |c| c.1),
                discretisation_slope: disc,
                roundoff_slope: round,
                predicted_optimal_dt: predict_optimal_dt(q, &ctx)?,
            });
        }
    }
    let report = SweepReport {
        config_hash: cfg.hash(),
        reference: ReferenceInfo { digits: ref_digits, q: ref_q, dt: ref_dt, self_check: short(&self_check) },
        samples,
        points,
        fits,
    };
    fs::create_dir_all(&cfg.out)?;
    let mut csv = BufWriter::new(File::create(cfg.out.join("sweep.csv"))?);
    writeln!(csv, "q,digits,dt,dt_used,error,status")?;
    for s in &report.samples {
        writeln!(csv, "{},{},{:e},{},{},{}", s.q, s.digits, s.dt, s.dt_used, s.error.as_deref().unwrap_or(""), s.status.replace(',', ";"))?;
    }
    csv.flush()?;
    let mut pcsv = BufWriter::new(File::create(cfg.out.join("sweep_points.csv"))?);
    writeln!(pcsv, "q,digits,dt,mean_error,ok")?;
    for p in &report.points {
        writeln!(pcsv, "{},{},{:e},{:e},{}", p.q, p.digits, p.dt, p.mean_error, p.ok)?;
    }
    pcsv.flush()?;
    write_json(&cfg.out.join("sweep.json"), &report)?;

    let points_dir = cfg.out.join("points");
    let mut index = Vec::new();
    for p in &report.points {
        let dir = points_dir.join(format!("q{}_d{}_dt{:e}", p.q, p.digits, p.dt));
        fs::create_dir_all(&dir)?;
        let (ctx, native) = context_for(cfg, p.digits)?;
        let mut rec = clock.record("sweep-point", cfg, precision_info(&ctx, native));
        rec.measured_error = Some(format!("{:e}", p.mean_error));
        rec.headline = Some(serde_json::json!({ "q": p.q, "digits": p.digits, "dt": p.dt, "samples": p.ok }));
        rec.status = if p.ok == cfg.nearby { "ok".into() } else { format!("{} of {} solves failed", cfg.nearby - p.ok, cfg.nearby) };
        write_json(&dir.join("record.json"), &rec)?;
        index.push(rec);
    }
    let mut rec = clock.record("sweep", cfg, precision_info(&ref_ctx, false));
    rec.artifacts = vec!["sweep.csv".into(), "sweep_points.csv".into(), "sweep.json".into()];
    persist_record(&cfg.out, &rec)?;
    let mut f = OpenOptions::new().append(true).open(cfg.out.join(INDEX_FILE))?;
    for r in index {
        writeln!(f, "{}", serde_json::to_string(&r)?)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub config_hash: String,
    pub mode: String,
    pub eps: f64,
    pub rho: f64,
    pub sweep: RmsSweep,
}

fn constant_dual(end: f64) -> Result<DualSolution<f64>> {
    let ctx = PrecisionContext::ieee_double();
    let part = Partition::from_nodes(vec![0.0, end])?;
    let basis = lagrange_basis(1, NodeFamily::Lobatto, &ctx)?;
    let one = Vector::from_vec(vec![1.0]);
    Ok(DualSolution { z: PiecewisePolynomial::new(part, basis, vec![vec![one.clone(); 2]])?, z_end: one, policy: "ones".into() })
}

fn mc_generic<R: Real>(
    cfg: &ExperimentConfig,
    dual: &DualSolution<R>,
    p: usize,
    ctx: &PrecisionContext,
    noise: &NoiseModel,
) -> Result<RmsSweep> {
    let basis = testing_basis::<R>(p, ctx)?;
    let dts: Vec<R> = cfg.dt.iter().map(|d| R::parse(d, ctx)).collect::<Result<_>>()?;
    let sweep = rms_scaling_sweep(dual, &basis, &dts, noise, cfg.trials)?;
    let part = Partition::with_step(dual.partition().end(), &dts[0], ctx)?;
    let weights = flatten_weights(&dual_at_testing_nodes(dual, &part, &basis)?);
    simulate_ec(&weights, noise, cfg.trials)?.write_csv(BufWriter::new(File::create(cfg.out.join("mc_samples.csv"))?))?;
    Ok(sweep)
}

/// RMS of the modelled computational error against `Δt` for the
/// configured dual weights.
pub fn cmd_mc(cfg: &ExperimentConfig) -> Result<McReport> {
    let clock = Clock::start();
    let digits = cfg.digits[0];
    let (ctx, native) = context_for(cfg, digits)?;
    let noise = NoiseModel::new(ctx.eps_f64(), cfg.seed).with_rho(cfg.rho)?;
    fs::create_dir_all(&cfg.out)?;
    let sweep = match cfg.mc_dual {
        McDual::Ones => {
            let ctx64 = PrecisionContext::ieee_double();
            mc_generic::<f64>(cfg, &constant_dual(cfg.end_f64())?, cfg.p.unwrap_or(0), &ctx64, &noise)?
        }
        McDual::Problem => {
            let q = cfg.q[0];
            let p = cfg.testing_degree(q);
            let comp = cfg.zt.components(usize::MAX)?[0];
            if native {
                mc_problem::<f64>(cfg, q, p, comp, &ctx, &noise)?
            } else {
                mc_problem::<BigFloat>(cfg, q, p, comp, &ctx, &noise)?
            }
        }
    };
    let report = McReport { config_hash: cfg.hash(), mode: cfg.mc_dual.to_string(), eps: noise.eps, rho: noise.rho, sweep };
    report.sweep.write_csv(BufWriter::new(File::create(cfg.out.join("mc.csv"))?))?;
    write_json(&cfg.out.join("mc.json"), &report)?;
    let mut rec = clock.record("mc", cfg, precision_info(&ctx, native));
    rec.artifacts = vec!["mc.csv".into(), "mc.json".into(), "mc_samples.csv".into()];
    rec.headline = Some(serde_json::json!({ "slope": report.sweep.slope, "seed": cfg.seed }));
    persist_record(&cfg.out, &rec)?;
    Ok(report)
}

fn mc_problem<R: Real>(
    cfg: &ExperimentConfig,
    q: usize,
    p: usize,
    comp: usize,
    ctx: &PrecisionContext,
    noise: &NoiseModel,
) -> Result<RmsSweep> {
    let traj = solve_generic::<R>(cfg, q, &cfg.dt[0], ctx, None)?;
    let problem = cfg.problem.build::<R>(&cfg.mu, ctx)?;
    if comp >= traj.dim() {
        return Err(Error::Config(format!("component {comp} out of range for dimension {}", traj.dim())));
    }
    let mut dcfg = DualConfig::for_testing_degree(p);
    if let Some(d) = cfg.dual_degree {
        dcfg = dcfg.with_degree(d);
    }
    let dual = crate::adjoint::solve_dual(&traj, problem.as_ref(), &Vector::unit(traj.dim(), comp, ctx), &dcfg)?;
    mc_generic(cfg, &dual, p, ctx, noise)
}

/// Output directory for a config relative to a base directory.
pub fn resolve_out(base: &Path, cfg: &ExperimentConfig) -> PathBuf {
    if cfg.out.is_absolute() {
        cfg.out.clone()
    } else {
        base.join(&cfg.out)
    }
}
