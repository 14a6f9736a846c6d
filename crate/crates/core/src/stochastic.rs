//! Monte-Carlo model of round-off: discrete residual components of size
//! `±ε` contracted against dual weights.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adjoint::DualSolution;
use crate::discretization::{BasisSpec, Partition, QuadratureRule};
use crate::error::{Error, Result};
use crate::estimator::dual_at_testing_nodes;
use crate::fit::line_fit;
use crate::numerics::{Real, Vector};

/// Random signs `x_{mki} ∈ {±1}` scaled by `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub eps: f64,
    pub seed: u64,
    /// Probability bias for repeating the previous sign: `P(x_n = x_{n-1}) = (1 + ρ)/2`.
    pub rho: f64,
}

impl NoiseModel {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self { eps, seed, rho: 0.0 }
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Config(format!("correlation must lie in [0, 1), got {rho}")));
        }
        self.rho = rho;
        Ok(self)
    }

    /// Independent generator for `trial`.
    pub fn stream(&self, trial: u64) -> SignStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        SignStream { rng, word: 0, left: 0, prev: 1.0, rho: self.rho }
    }
}

/// Sign sequence of one trial.
pub struct SignStream {
    rng: ChaCha8Rng,
    word: u64,
    left: u32,
    prev: f64,
    rho: f64,
}

impl SignStream {
    fn bit(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        b
    }

    pub fn next_sign(&mut self) -> f64 {
        if self.rho == 0.0 {
            return if self.bit() { 1.0 } else { -1.0 };
        }
        // Markov chain with lag-one correlation ρ.
        let u = (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        if u >= (1.0 + self.rho) / 2.0 {
            self.prev = -self.prev;
        }
        self.prev
    }
}

/// Samples of `E_C = ε Σ w·x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcSamples {
    pub samples: Vec<f64>,
    pub rms: f64,
    pub mean_abs: f64,
    pub seed: u64,
}

impl EcSamples {
    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
    }

    /// CSV with columns `trial, e_c`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "trial,e_c")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{i},{s:e}")?;
        }
        Ok(())
    }
}

/// Flattens `z_i(t_{m-1} + τ_k Δt_m)` into f64 weights.
pub fn flatten_weights<R: Real>(nodal: &[Vec<Vector<R>>]) -> Vec<f64> {
    nodal.iter().flatten().flat_map(|v| v.iter().map(Real::to_f64)).collect()
}

/// `ε² Σ w²`, the exact variance of `E_C`.
pub fn exact_variance(weights: &[f64], eps: f64) -> f64 {
    eps * eps * weights.iter().map(|w| w * w).sum::<f64>()
}

pub fn simulate_ec(weights: &[f64], noise: &NoiseModel, trials: usize) -> Result<EcSamples> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut s = noise.stream(t);
            noise.eps * weights.iter().map(|w| w * s.next_sign()).sum::<f64>()
        })
        .collect();
    let n = samples.len() as f64;
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let mean_abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    Ok(EcSamples { samples, rms, mean_abs, seed: noise.seed })
}

/// One row of an RMS sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dt: f64,
    pub rms: f64,
    pub mean_abs: f64,
    /// `ε (Σ ‖z(node)‖²)^{1/2}`.
    pub exact_rms: f64,
    /// `S_C2 ε / √Δt`.
    pub bound: f64,
    /// `S_C ε / √Δt`, for comparison with the mean absolute value.
    pub mean_abs_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmsSweep {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of `rms` against `Δt`.
    pub slope: f64,
    pub seed: u64,
    pub trials: usize,
}

impl RmsSweep {
    /// CSV with columns `dt, rms, mean_abs, exact_rms, bound, mean_abs_scale`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "dt,rms,mean_abs,exact_rms,bound,mean_abs_scale")?;
        for r in &self.rows {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e},{:e}", r.dt, r.rms, r.mean_abs, r.exact_rms, r.bound, r.mean_abs_scale)?;
        }
        Ok(())
    }
}

/// RMS of `E_C` for the dual sampled on uniform partitions with steps `dts`.
pub fn rms_scaling_sweep<R: Real>(
    dual: &DualSolution<R>,
    basis: &BasisSpec<R>,
    dts: &[R],
    noise: &NoiseModel,
    trials: usize,
) -> Result<RmsSweep> {
    if dts.len() < 3 {
        return Err(Error::Config("a sweep needs at least 3 step sizes".into()));
    }
    let ctx = dual.partition().start().context();
    let end = dual.partition().end().clone();
    let rule = QuadratureRule::<R>::gauss_legendre(basis.degree() + 2, &ctx)?;
    let mut rows = Vec::with_capacity(dts.len());
    for dt in dts {
        let part = Partition::with_step(&end, dt, &ctx)?;
        let nodal = dual_at_testing_nodes(dual, &part, basis)?;
        let weights = flatten_weights(&nodal);
        let sim = simulate_ec(&weights, noise, trials)?;
        let (s_c, s_c2) = interpolant_norms(&nodal, &part, basis, &rule);
        let root = part.min_width().to_f64().sqrt();
        rows.push(SweepRow {
            dt: dt.to_f64(),
            rms: sim.rms,
            mean_abs: sim.mean_abs,
            exact_rms: exact_variance(&weights, noise.eps).sqrt(),
            bound: s_c2 * noise.eps / root,
            mean_abs_scale: s_c * noise.eps / root,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt.log10(), r.rms.log10())).collect();
    let slope = line_fit(&pts).map_or(f64::NAN, |f| f.slope);
    Ok(RmsSweep { rows, slope, seed: noise.seed, trials })
}

/// `(∫‖πz‖, (∫‖πz‖²)^{1/2})` from nodal values.
fn interpolant_norms<R: Real>(
    nodal: &[Vec<Vector<R>>],
    part: &Partition<R>,
    basis: &BasisSpec<R>,
    rule: &QuadratureRule<R>,
) -> (f64, f64) {
    let lam: Vec<Vec<R>> = rule.points().iter().map(|s| basis.values(s)).collect();
    let (mut a, mut b) = (0.0, 0.0);
    for (m, zs) in nodal.iter().enumerate() {
        let h = part.width(m).to_f64();
        for (l, w) in rule.weights().iter().enumerate() {
            let n = crate::discretization::combine(zs, &lam[l]).norm().to_f64();
            a += w.to_f64() * h * n;
            b += w.to_f64() * h * n * n;
        }
    }
    (a, b.sqrt())
}

/// Empirical `E|Σ_{i≤M} x_i|` for independent signs.
pub fn random_walk_expectation(m: usize, trials: usize, seed: u64) -> Result<f64> {
    if m == 0 || trials == 0 {
        return Err(Error::Config("walk length and trials must be positive".into()));
    }
    let noise = NoiseModel::new(1.0, seed);
    let total: u64 = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut s = noise.stream(t);
            let mut ones = 0u64;
            let mut left = m;
            while left > 0 {
                let take = left.min(64);
                let mut w = s.rng.next_u64();
                if take < 64 {
                    w &= (1u64 << take) - 1;
                }
                ones += w.count_ones() as u64;
                left -= take;
            }
            (2 * ones as i64 - m as i64).unsigned_abs()
        })
        .sum();
    Ok(total as f64 / trials as f64)
}

/// `E|Σ_{i≤M} x_i|` by listing all `2^M` sign sequences.
pub fn enumerate_walk(m: u32) -> Result<f64> {
    if m == 0 || m > 30 {
        return Err(Error::Config(format!("enumeration supports 1..=30 steps, got {m}")));
    }
    let total: u64 = (0u64..1 << m).map(|w| (2 * w.count_ones() as i64 - m as i64).unsigned_abs()).sum();
    Ok(total as f64 / (1u64 << m) as f64)
}

/// `√(2M/π)`, the large-`M` limit of the mean distance.
pub fn walk_asymptote(m: usize) -> f64 {
    (2.0 * m as f64 / std::f64::consts::PI).sqrt()
}
