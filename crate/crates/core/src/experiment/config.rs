//! Flat `key = value` experiment configuration.
//!
//! Keys (lists are comma separated):
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `problem` | `lorenz`, `vanderpol`, `linear:<path>` | `lorenz` |
//! | `mu` | van der Pol parameter | `1000` |
//! | `T` | final time | `1` |
//! | `q` | method degrees | `1` |
//! | `dt` | time steps | `0.01` |
//! | `digits` | working precisions | `16` |
//! | `p` | testing degree | `q - 1` |
//! | `tol` | nonlinear tolerance | `10 eps` |
//! | `dual_degree` | degree of the dual solver | `max(p + 2, 3)` |
//! | `zt` | `all` or a component index | `all` |
//! | `seed`, `trials`, `rho` | Monte-Carlo settings | `0`, `1000`, `0` |
//! | `mc_dual` | `ones` or `problem` | `ones` |
//! | `nearby`, `spread` | steps averaged per sweep point and their relative spread | `1`, `0.05` |
//! | `ref_digits`, `ref_degree`, `ref_dt` | reference solution | `2 digits`, `q + 2`, `dt / 2` |
//! | `growth_stride`, `growth_from` | final-time profile sampling and fit start | `0` (off), `T / 6` |
//! | `backend` | `auto`, `f64`, `mpfr` | `auto` |
//! | `long_threshold` | estimated seconds before `--confirm-long` is needed | `600` |
//! | `out` | output directory | `out` |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::problems::ProblemSpec;

/// Scalar implementation used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Auto,
    F64,
    Mpfr,
}

impl Backend {
    /// Whether `digits` runs on native binary64.
    pub fn uses_f64(self, digits: u32) -> bool {
        match self {
            Backend::Auto => digits <= 16,
            Backend::F64 => true,
            Backend::Mpfr => false,
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Backend::Auto),
            "f64" => Ok(Backend::F64),
            "mpfr" => Ok(Backend::Mpfr),
            other => Err(Error::Config(format!("unknown backend '{other}'"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Auto => "auto",
            Backend::F64 => "f64",
            Backend::Mpfr => "mpfr",
        })
    }
}

/// Which unit terminal vectors the estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalPolicy {
    All,
    Component(usize),
}

impl TerminalPolicy {
    pub fn components(self, dim: usize) -> Result<Vec<usize>> {
        match self {
            TerminalPolicy::All => Ok((0..dim).collect()),
            TerminalPolicy::Component(i) if i < dim => Ok(vec![i]),
            TerminalPolicy::Component(i) => Err(Error::Config(format!("component {i} out of range for dimension {dim}"))),
        }
    }
}

impl FromStr for TerminalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(TerminalPolicy::All),
            n => n
                .parse()
                .map(TerminalPolicy::Component)
                .map_err(|_| Error::Config(format!("zt must be 'all' or an index, got '{n}'"))),
        }
    }
}

impl fmt::Display for TerminalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalPolicy::All => f.write_str("all"),
            TerminalPolicy::Component(i) => write!(f, "{i}"),
        }
    }
}

/// Dual weights for Monte-Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McDual {
    /// `z ≡ 1` with `N = 1`.
    Ones,
    /// Dual of the configured problem.
    Problem,
}

impl FromStr for McDual {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ones" => Ok(McDual::Ones),
            "problem" => Ok(McDual::Problem),
            other => Err(Error::Config(format!("mc_dual must be 'ones' or 'problem', got '{other}'"))),
        }
    }
}

impl fmt::Display for McDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            McDual::Ones => "ones",
            McDual::Problem => "problem",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub mu: String,
    pub end: String,
    pub q: Vec<usize>,
    pub dt: Vec<String>,
    pub digits: Vec<u32>,
    pub p: Option<usize>,
    pub tol: Option<String>,
    pub dual_degree: Option<usize>,
    pub zt: TerminalPolicy,
    pub seed: u64,
    pub trials: usize,
    pub rho: f64,
    pub mc_dual: McDual,
    pub nearby: usize,
    pub spread: f64,
    pub ref_digits: Option<u32>,
    pub ref_degree: Option<usize>,
    pub ref_dt: Option<String>,
    pub growth_stride: usize,
    pub growth_from: Option<String>,
    pub backend: Backend,
    pub long_threshold: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Lorenz,
            mu: "1000".into(),
            end: "1".into(),
            q: vec![1],
            dt: vec!["0.01".into()],
            digits: vec![16],
            p: None,
            tol: None,
            dual_degree: None,
            zt: TerminalPolicy::All,
            seed: 0,
            trials: 1000,
            rho: 0.0,
            mc_dual: McDual::Ones,
            nearby: 1,
            spread: 0.05,
            ref_digits: None,
            ref_degree: None,
            ref_dt: None,
            growth_stride: 0,
            growth_from: None,
            backend: Backend::Auto,
            long_threshold: 600.0,
            out: PathBuf::from("out"),
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("bad value '{s}' for {key}"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key, as from a config line or a command-line flag.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "problem" => self.problem = v.parse()?,
            "mu" => self.mu = v.to_string(),
            "T" => self.end = v.to_string(),
            "q" => self.q = list(key, v)?,
            "dt" => self.dt = list(key, v)?,
            "digits" => self.digits = list(key, v)?,
            "p" => self.p = Some(one(key, v)?),
            "tol" => self.tol = Some(v.to_string()),
            "dual_degree" => self.dual_degree = Some(one(key, v)?),
            "zt" => self.zt = v.parse()?,
            "seed" => self.seed = one(key, v)?,
            "trials" => self.trials = one(key, v)?,
            "rho" => self.rho = one(key, v)?,
            "mc_dual" => self.mc_dual = v.parse()?,
            "nearby" => self.nearby = one(key, v)?,
            "spread" => self.spread = one(key, v)?,
            "ref_digits" => self.ref_digits = Some(one(key, v)?),
            "ref_degree" => self.ref_degree = Some(one(key, v)?),
            "ref_dt" => self.ref_dt = Some(v.to_string()),
            "growth_stride" => self.growth_stride = one(key, v)?,
            "growth_from" => self.growth_from = Some(v.to_string()),
            "backend" => self.backend = v.parse()?,
            "long_threshold" => self.long_threshold = one(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let num = |key: &str, v: &str| -> Result<f64> {
            let x: f64 = one(key, v)?;
            if x.is_finite() && x > 0.0 {
                Ok(x)
            } else {
                Err(Error::Config(format!("{key} must be positive, got '{v}'")))
            }
        };
        num("T", &self.end)?;
        for dt in &self.dt {
            num("dt", dt)?;
        }
        if let Some(r) = &self.ref_dt {
            num("ref_dt", r)?;
        }
        if self.q.iter().any(|&q| q == 0) {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if self.digits.iter().any(|&d| d == 0) {
            return Err(Error::Config("digits must be at least 1".into()));
        }
        if self.trials == 0 || self.nearby == 0 {
            return Err(Error::Config("trials and nearby must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.spread) {
            return Err(Error::Config(format!("spread must lie in [0, 1), got {}", self.spread)));
        }
        Ok(())
    }

    /// Key-value lines of every setting that affects numbers.
    fn numeric_entries(&self) -> BTreeMap<&'static str, String> {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        let optn = |o: Option<usize>| o.map(|x| x.to_string()).unwrap_or_default();
        BTreeMap::from([
            ("problem", self.problem.to_string()),
            ("mu", self.mu.clone()),
            ("T", self.end.clone()),
            ("q", join(&self.q)),
            ("dt", join(&self.dt)),
            ("digits", join(&self.digits)),
            ("p", optn(self.p)),
            ("tol", opt(&self.tol)),
            ("dual_degree", optn(self.dual_degree)),
            ("zt", self.zt.to_string()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("rho", self.rho.to_string()),
            ("mc_dual", self.mc_dual.to_string()),
            ("nearby", self.nearby.to_string()),
            ("spread", self.spread.to_string()),
            ("ref_digits", self.ref_digits.map(|x| x.to_string()).unwrap_or_default()),
            ("ref_degree", optn(self.ref_degree)),
            ("ref_dt", opt(&self.ref_dt)),
            ("growth_stride", self.growth_stride.to_string()),
            ("growth_from", opt(&self.growth_from)),
            ("backend", self.backend.to_string()),
        ])
    }

    /// Canonical text; parsing it returns an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.numeric_entries() {
            if !v.is_empty() {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s.push_str(&format!("long_threshold = {}\n", self.long_threshold));
        s.push_str(&format!("out = {}\n", self.out.display()));
        s
    }

    /// SHA-256 of the numeric settings, hex encoded. Output location and
    /// the long-run threshold do not enter.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.numeric_entries() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Short form of [`hash`](Self::hash) for file names.
    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    pub fn testing_degree(&self, q: usize) -> usize {
        self.p.unwrap_or(q.saturating_sub(1))
    }

    pub fn end_f64(&self) -> f64 {
        self.end.parse().expect("validated")
    }
}
