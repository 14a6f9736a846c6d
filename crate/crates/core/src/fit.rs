//! Least-squares line fits for log-log scaling studies.

use serde::{Deserialize, Serialize};

/// Straight line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares through `(x, y)` pairs; non-finite pairs are skipped.
pub fn line_fit(pts: &[(f64, f64)]) -> Option<LineFit> {
    let pts: Vec<_> = pts.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r2, points: n })
}

/// Slope of [`line_fit`], or NaN when undefined.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    line_fit(pts).map_or(f64::NAN, |f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let f = line_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(line_fit(&[(1.0, 2.0)]).is_none());
        assert!(slope(&[(1.0, 2.0), (1.0, 3.0)]).is_nan());
    }
}
