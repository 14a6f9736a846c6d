use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretization::quadrature::{gauss_legendre_points, gauss_lobatto_points};
use crate::discretization::Poly;
use crate::error::{Error, Result};
use crate::numerics::{PrecisionContext, Real};

/// Placement of the reference nodes on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeFamily {
    /// Gauss–Lobatto points, endpoints included.
    Lobatto,
    /// Gauss–Legendre points, interior only.
    Gauss,
    /// Equispaced `k / p`.
    Uniform,
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeFamily::Lobatto => "lobatto",
            NodeFamily::Gauss => "gauss",
            NodeFamily::Uniform => "uniform",
        })
    }
}

impl FromStr for NodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lobatto" => Ok(NodeFamily::Lobatto),
            "gauss" => Ok(NodeFamily::Gauss),
            "uniform" => Ok(NodeFamily::Uniform),
            other => Err(Error::Config(format!("unknown node family '{other}'"))),
        }
    }
}

/// Lagrange nodal basis of degree `p` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec<R> {
    family: NodeFamily,
    nodes: Vec<R>,
    /// `1 / ∏_{j≠k} (τ_k - τ_j)`.
    scales: Vec<R>,
    polys: Vec<Poly<R>>,
    slopes: Vec<Poly<R>>,
}

/// Builds the degree-`p` nodal basis for `family`.
pub fn lagrange_basis<R: Real>(p: usize, family: NodeFamily, ctx: &PrecisionContext) -> Result<BasisSpec<R>> {
    BasisSpec::new(p, family, ctx)
}

impl<R: Real> BasisSpec<R> {
    pub fn new(p: usize, family: NodeFamily, ctx: &PrecisionContext) -> Result<Self> {
        let nodes: Vec<R> = match family {
            NodeFamily::Lobatto => {
                if p == 0 {
                    return Err(Error::Basis("Lobatto nodes need degree p >= 1".into()));
                }
                to_unit(gauss_lobatto_points::<R>(p + 1, ctx).0, ctx)
            }
            NodeFamily::Gauss => to_unit(gauss_legendre_points::<R>(p + 1, ctx).0, ctx),
            NodeFamily::Uniform => {
                if p == 0 {
                    vec![R::zero(ctx)]
                } else {
                    (0..=p).map(|k| R::from_ratio(k as i64, p as i64, ctx)).collect()
                }
            }
        };
        Self::from_nodes(nodes, family, ctx)
    }

    /// Basis for arbitrary distinct nodes in `[0, 1]`, listed ascending.
    pub fn from_nodes(nodes: Vec<R>, family: NodeFamily, ctx: &PrecisionContext) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Basis("need at least one node".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Basis("nodes must be strictly increasing".into()));
        }
        let mut scales = Vec::with_capacity(nodes.len());
        let mut polys = Vec::with_capacity(nodes.len());
        for (k, tk) in nodes.iter().enumerate() {
            let others: Vec<R> =
                nodes.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, t)| t.clone()).collect();
            let mut denom = R::one(ctx);
            for t in &others {
                denom *= tk.clone() - t;
            }
            let scale = R::one(ctx) / denom;
            let poly = Poly::from_roots(&others, ctx);
            polys.push(Poly::new(poly.coeffs().iter().map(|c| c.clone() * &scale).collect()));
            scales.push(scale);
        }
        let slopes = polys.iter().map(|p| p.derivative(1)).collect();
        Ok(Self { family, nodes, scales, polys, slopes })
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    pub fn nodes(&self) -> &[R] {
        &self.nodes
    }

    /// `λ_k` in coefficient form.
    pub fn polys(&self) -> &[Poly<R>] {
        &self.polys
    }

    /// Whether the first and last nodes are `0` and `1`.
    pub fn has_endpoints(&self) -> bool {
        self.nodes[0].is_zero() && self.nodes.last().unwrap() == &R::one(&self.nodes[0].context())
    }

    /// All `λ_k(s)`, evaluated in product form.
    pub fn values(&self, s: &R) -> Vec<R> {
        let n = self.nodes.len();
        if let Some(hit) = self.nodes.iter().position(|t| t == s) {
            let ctx = s.context();
            return (0..n).map(|k| if k == hit { R::one(&ctx) } else { R::zero(&ctx) }).collect();
        }
        let diffs: Vec<R> = self.nodes.iter().map(|t| s.clone() - t).collect();
        (0..n)
            .map(|k| {
                let mut v = self.scales[k].clone();
                for (j, d) in diffs.iter().enumerate() {
                    if j != k {
                        v *= d;
                    }
                }
                v
            })
            .collect()
    }

    /// All `λ_k^{(order)}(s)` on the reference interval.
    pub fn derivatives(&self, s: &R, order: usize) -> Vec<R> {
        match order {
            0 => self.values(s),
            1 => self.slopes.iter().map(|p| p.eval(s)).collect(),
            _ => self.polys.iter().map(|p| p.derivative(order).eval(s)).collect(),
        }
    }

    /// `λ_k(0)` for every `k`.
    pub fn values_at_zero(&self) -> Vec<R> {
        self.values(&self.nodes[0].zero_like())
    }
}

fn to_unit<R: Real>(xs: Vec<R>, ctx: &PrecisionContext) -> Vec<R> {
    let one = R::one(ctx);
    xs.into_iter().map(|x| (x + &one).mul_pow2(-1)).collect()
}

/// Shifted Legendre polynomial `P_n(2s - 1)` in coefficient form.
pub fn shifted_legendre<R: Real>(n: usize, ctx: &PrecisionContext) -> Poly<R> {
    // P_n(2s-1) = Σ_k (-1)^{n+k} C(n,k) C(n+k,k) s^k
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut c = R::one(ctx);
    for k in 0..=n {
        if k > 0 {
            // C(n,k)C(n+k,k) / C(n,k-1)C(n+k-1,k-1) = (n-k+1)(n+k) / k^2
            c = c * R::from_i64(((n - k + 1) * (n + k)) as i64, ctx) / R::from_i64((k * k) as i64, ctx);
        }
        coeffs.push(if (n + k) % 2 == 0 { c.clone() } else { -c.clone() });
    }
    Poly::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BigFloat;
    use proptest::prelude::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(50).unwrap()
    }

    fn tol(c: &PrecisionContext, k: i64) -> BigFloat {
        c.eps::<BigFloat>() * BigFloat::from_i64(k, c)
    }

    #[test]
    fn constant_and_linear_bases() {
        let c = ctx();
        let b = lagrange_basis::<BigFloat>(0, NodeFamily::Uniform, &c).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.values(&BigFloat::from_f64(0.7, &c))[0], BigFloat::one(&c));
        let b = lagrange_basis::<BigFloat>(1, NodeFamily::Lobatto, &c).unwrap();
        assert!(b.nodes()[0].is_zero());
        assert_eq!(b.nodes()[1], BigFloat::one(&c));
        let s = BigFloat::from_f64(0.3, &c);
        let v = b.values(&s);
        assert!((v[0].clone() - (BigFloat::one(&c) - &s)).abs() <= tol(&c, 2));
        assert!((v[1].clone() - &s).abs() <= tol(&c, 2));
        assert!(lagrange_basis::<BigFloat>(0, NodeFamily::Lobatto, &c).is_err());
    }

    #[test]
    fn cubic_lobatto_interior_nodes() {
        let c = ctx();
        let b = lagrange_basis::<BigFloat>(3, NodeFamily::Lobatto, &c).unwrap();
        // Oracle: bisection on P_3'(x) = (15x^2 - 3)/2 over (0, 1), mapped to [0, 1].
        let mut lo = BigFloat::from_f64(0.1, &c);
        let mut hi = BigFloat::one(&c);
        let g = |x: &BigFloat| BigFloat::from_i64(15, &c) * x * x - BigFloat::from_i64(3, &c);
        for _ in 0..200 {
            let mid = (lo.clone() + &hi).mul_pow2(-1);
            if g(&mid) > BigFloat::zero(&c) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = (lo + &hi).mul_pow2(-1);
        let one = BigFloat::one(&c);
        let upper = (one.clone() + &root).mul_pow2(-1);
        let lower = (one.clone() - &root).mul_pow2(-1);
        assert!((b.nodes()[1].clone() - &lower).abs() <= tol(&c, 10));
        assert!((b.nodes()[2].clone() - &upper).abs() <= tol(&c, 10));
        let closed = (one.clone() + one.clone() / BigFloat::from_i64(5, &c).sqrt()).mul_pow2(-1);
        assert!((b.nodes()[2].clone() - closed).abs() <= tol(&c, 10));
    }

    #[test]
    fn nodal_property_all_families() {
        let c = ctx();
        for family in [NodeFamily::Lobatto, NodeFamily::Gauss, NodeFamily::Uniform] {
            for p in 1..=8 {
                let b = lagrange_basis::<BigFloat>(p, family, &c).unwrap();
                for (j, t) in b.nodes().iter().enumerate() {
                    for (k, (v, poly)) in b.values(t).iter().zip(b.polys()).enumerate() {
                        let want = if j == k { BigFloat::one(&c) } else { BigFloat::zero(&c) };
                        assert!((v.clone() - &want).abs() <= tol(&c, 10), "{family} p={p}");
                        // Coefficient form loses digits in proportion to Σ|c_i|.
                        let size = poly.coeffs().iter().map(|x| x.abs()).reduce(|a, b| a + b).unwrap();
                        let err = (poly.eval(t) - &want).abs();
                        assert!(err <= tol(&c, 10) * size, "{family} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn shifted_legendre_is_orthogonal() {
        let c = ctx();
        let p3 = shifted_legendre::<BigFloat>(3, &c);
        assert_eq!(p3.eval(&BigFloat::one(&c)), BigFloat::one(&c));
        let p2 = shifted_legendre::<BigFloat>(2, &c);
        let prod = p3.mul(&p2).integral(&BigFloat::zero(&c), &BigFloat::one(&c));
        assert!(prod.abs() <= tol(&c, 100));
        let sq = p2.mul(&p2).integral(&BigFloat::zero(&c), &BigFloat::one(&c));
        assert!((sq - BigFloat::from_ratio(1, 5, &c)).abs() <= tol(&c, 100));
    }

    #[test]
    fn family_parses() {
        assert_eq!("Lobatto".parse::<NodeFamily>().unwrap(), NodeFamily::Lobatto);
        assert!("chebyshev".parse::<NodeFamily>().is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(s in 0.0f64..=1.0, p in 1usize..10) {
            let c = ctx();
            for family in [NodeFamily::Lobatto, NodeFamily::Gauss] {
                let b = lagrange_basis::<BigFloat>(p, family, &c).unwrap();
                let sum = b.values(&BigFloat::from_f64(s, &c)).into_iter().reduce(|a, b| a + b).unwrap();
                prop_assert!((sum - BigFloat::one(&c)).abs() <= tol(&c, 10));
            }
        }
    }
}
