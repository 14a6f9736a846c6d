use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real};

/// Strictly increasing time grid `0 = t_0 < t_1 < … < t_M = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<R> {
    nodes: Vec<R>,
}

impl<R: Real> Partition<R> {
    pub fn from_nodes(nodes: Vec<R>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Partition("need at least two nodes".into()));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::Partition(format!(
                    "nodes must increase strictly (t_{i} = {}, t_{} = {})",
                    w[0],
                    i + 1,
                    w[1]
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// `intervals` equal steps on `[start, end]`, with `t_m = start + (end - start) m / M`.
    pub fn uniform(start: &R, end: &R, intervals: usize, ctx: &PrecisionContext) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::Partition("need at least one interval".into()));
        }
        let len = end.clone() - start;
        let m_total = R::from_i64(intervals as i64, ctx);
        let mut nodes = Vec::with_capacity(intervals + 1);
        nodes.push(start.clone());
        for m in 1..intervals {
            nodes.push(start.clone() + len.clone() * R::from_i64(m as i64, ctx) / &m_total);
        }
        nodes.push(end.clone());
        Self::from_nodes(nodes)
    }

    /// Uniform partition of `[0, T]` with step as close to `dt` as divides `T`.
    pub fn with_step(end: &R, dt: &R, ctx: &PrecisionContext) -> Result<Self> {
        let m = (end.to_f64() / dt.to_f64()).round().max(1.0) as usize;
        Self::uniform(&R::zero(ctx), end, m, ctx)
    }

    pub fn nodes(&self) -> &[R] {
        &self.nodes
    }

    /// Number of intervals `M`.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> &R {
        &self.nodes[0]
    }

    pub fn end(&self) -> &R {
        self.nodes.last().unwrap()
    }

    /// Left endpoint of interval `m` (zero-based).
    pub fn left(&self, m: usize) -> &R {
        &self.nodes[m]
    }

    pub fn right(&self, m: usize) -> &R {
        &self.nodes[m + 1]
    }

    /// Width of interval `m` (zero-based).
    pub fn width(&self, m: usize) -> R {
        self.nodes[m + 1].clone() - &self.nodes[m]
    }

    pub fn min_width(&self) -> R {
        (0..self.len()).map(|m| self.width(m)).reduce(R::min_of).unwrap()
    }

    pub fn max_width(&self) -> R {
        (0..self.len()).map(|m| self.width(m)).reduce(R::max_of).unwrap()
    }

    /// Zero-based interval containing `t`, using `(t_{m-1}, t_m]` with `t_0`
    /// assigned to the first interval.
    pub fn locate(&self, t: &R) -> Result<usize> {
        if t < self.start() || t > self.end() {
            return Err(Error::OutOfDomain {
                t: t.to_decimal(),
                start: self.start().to_decimal(),
                end: self.end().to_decimal(),
            });
        }
        let first_ge = self.nodes.partition_point(|x| x < t);
        Ok(first_ge.max(1) - 1)
    }

    /// Local coordinate `(t - t_{m-1}) / Δt_m`.
    pub fn local(&self, m: usize, t: &R) -> R {
        (t.clone() - &self.nodes[m]) / self.width(m)
    }

    /// Global time of local coordinate `s` on interval `m`.
    pub fn global(&self, m: usize, s: &R) -> R {
        self.nodes[m].clone() + self.width(m) * s
    }

    /// Each interval split into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let ctx = self.nodes[0].context();
        let f = R::from_i64(factor as i64, &ctx);
        let mut nodes = Vec::with_capacity(self.len() * factor + 1);
        for m in 0..self.len() {
            let w = self.width(m);
            nodes.push(self.nodes[m].clone());
            for j in 1..factor {
                nodes.push(self.nodes[m].clone() + w.clone() * R::from_i64(j as i64, &ctx) / &f);
            }
        }
        nodes.push(self.end().clone());
        Self::from_nodes(nodes)
    }

    /// Sorted union of the breakpoints of two partitions of the same interval.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut nodes = Vec::with_capacity(self.nodes.len() + other.nodes.len());
        let (mut i, mut j) = (0, 0);
        while i < self.nodes.len() || j < other.nodes.len() {
            let next = match (self.nodes.get(i), other.nodes.get(j)) {
                (Some(a), Some(b)) if a == b => {
                    i += 1;
                    j += 1;
                    a.clone()
                }
                (Some(a), Some(b)) if a < b => {
                    i += 1;
                    a.clone()
                }
                (Some(_), Some(b)) => {
                    j += 1;
                    b.clone()
                }
                (Some(a), None) => {
                    i += 1;
                    a.clone()
                }
                (None, Some(b)) => {
                    j += 1;
                    b.clone()
                }
                (None, None) => unreachable!(),
            };
            nodes.push(next);
        }
        Self::from_nodes(nodes)
    }

    /// Prefix ending at node `j` (so `j` intervals).
    pub fn truncate(&self, j: usize) -> Result<Self> {
        Self::from_nodes(self.nodes[..=j].to_vec())
    }
}
