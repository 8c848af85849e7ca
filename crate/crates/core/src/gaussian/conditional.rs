use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::increment_covariance;
use super::sampler::cholesky_with_jitter;
use crate::error::{Error, Result};

/// Increments between consecutive points of `pts` (sorted, deduplicated).
fn increments_of(mut pts: Vec<f64>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Conditioning increments for the σ-field generated by the path on
/// `outside ∩ [0,s]` (with `s`) and `outside ∩ [t,T]` (with `t`).
fn outside_increments(s: f64, t: f64, outside: &[f64]) -> Result<Vec<(f64, f64)>> {
    if outside.iter().any(|&p| p > s + 1e-14 && p < t - 1e-14) {
        return Err(Error::Domain("outside grid must avoid the open interval (s, t)".into()));
    }
    let left: Vec<f64> = outside.iter().copied().filter(|&p| p <= s).chain([s]).collect();
    let right: Vec<f64> = outside.iter().copied().filter(|&p| p >= t).chain([t]).collect();
    let mut incs = increments_of(left);
    incs.extend(increments_of(right));
    Ok(incs)
}

/// `Cov(Z_a, Z_b | Y)` for increments `a`, `b` given conditioning increments.
fn conditional_covariance(hurst: f64, a: (f64, f64), b: (f64, f64), given: &[(f64, f64)]) -> Result<f64> {
    let prior = increment_covariance(hurst, a, b);
    if given.is_empty() {
        return Ok(prior);
    }
    let n = given.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| increment_covariance(hurst, given[i], given[j]));
    let ca = DVector::from_fn(n, |i, _| increment_covariance(hurst, given[i], a));
    let cb = DVector::from_fn(n, |i, _| increment_covariance(hurst, given[i], b));
    let chol = cholesky_with_jitter(sigma)
        .map_err(|_| Error::NotPositiveDefinite(format!("conditioning block of size {n} is singular")))?;
    Ok(prior - ca.dot(&chol.solve(&cb)))
}

/// `Var(B_t − B_s | increments on the outside grid)` by Gaussian conditioning.
pub fn conditional_increment_variance(hurst: f64, s: f64, t: f64, outside: &[f64]) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) || !(s >= 0.0 && t > s) {
        return Err(Error::Domain("need H in (0,1) and 0 <= s < t".into()));
    }
    let given = outside_increments(s, t, outside)?;
    conditional_covariance(hurst, (s, t), (s, t), &given)
}

/// Minimum of `Cov(Z_{s,t}, Z_{u,v} | outside)` over a dyadic family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalCovarianceReport {
    pub hurst: f64,
    pub horizon: f64,
    pub levels: usize,
    pub min_covariance: f64,
    /// Pairs checked.
    pub checked: usize,
    /// Pairs with covariance below −1e-6.
    pub negatives: usize,
}

/// Scans dyadic windows `[s,t]` of `[0,T]` at levels `1..=levels`, their
/// dyadic sub-windows `[u,v]`, and conditions on the dyadic points of the
/// finest level outside `[s,t]`.
pub fn min_conditional_covariance(hurst: f64, horizon: f64, levels: usize) -> Result<ConditionalCovarianceReport> {
    let fine = 1usize << levels;
    let pts: Vec<f64> = (0..=fine).map(|i| horizon * i as f64 / fine as f64).collect();
    let mut min_covariance = f64::INFINITY;
    let (mut checked, mut negatives) = (0, 0);
    for level in 1..=levels {
        let step = fine >> level;
        for start in (0..fine).step_by(step) {
            let (s, t) = (pts[start], pts[start + step]);
            let outside: Vec<f64> = pts.iter().copied().filter(|&p| p <= s || p >= t).collect();
            let given = outside_increments(s, t, &outside)?;
            let mut sub = step;
            while sub >= 1 {
                for j in (start..start + step).step_by(sub) {
                    let c = conditional_covariance(hurst, (s, t), (pts[j], pts[j + sub]), &given)?;
                    min_covariance = min_covariance.min(c);
                    checked += 1;
                    if c < -1e-6 {
                        negatives += 1;
                    }
                }
                sub /= 2;
            }
        }
    }
    Ok(ConditionalCovarianceReport { hurst, horizon, levels, min_covariance, checked, negatives })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn brownian_is_unconditional() {
        let v = conditional_increment_variance(0.5, 0.25, 0.5, &[0.0, 0.125, 0.75, 1.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-10);
    }

    #[test]
    fn fewer_points_never_lower() {
        for &h in &[0.3, 0.7] {
            let fine: Vec<f64> = dyadic(32).into_iter().filter(|&p| p <= 0.375 || p >= 0.5).collect();
            let coarse: Vec<f64> = dyadic(8).into_iter().filter(|&p| p <= 0.375 || p >= 0.5).collect();
            let vf = conditional_increment_variance(h, 0.375, 0.5, &fine).unwrap();
            let vc = conditional_increment_variance(h, 0.375, 0.5, &coarse).unwrap();
            let v0 = conditional_increment_variance(h, 0.375, 0.5, &[]).unwrap();
            assert!(vf <= vc + 1e-12 && vc <= v0 + 1e-12, "{vf} {vc} {v0}");
            assert!(vf > 0.0);
        }
    }

    #[test]
    fn nondeterminism_ratio_bounded_below() {
        // α = 2 ≥ 2H, so Var/(t−s)^2 stays away from zero on shrinking windows
        let grid = dyadic(64);
        let mut min_ratio = f64::INFINITY;
        for k in 1..=5 {
            let len = 1.0 / (1 << k) as f64;
            let s = 0.5 - len;
            let outside: Vec<f64> = grid.iter().copied().filter(|&p| p <= s || p >= 0.5).collect();
            let v = conditional_increment_variance(0.3, s, 0.5, &outside).unwrap();
            min_ratio = min_ratio.min(v / len.powi(2));
        }
        assert!(min_ratio > 0.1, "{min_ratio}");
    }

    #[test]
    fn rejects_points_inside() {
        assert!(conditional_increment_variance(0.4, 0.2, 0.4, &[0.3]).is_err());
    }

    #[test]
    fn dyadic_family_report() {
        let r = min_conditional_covariance(0.5, 1.0, 3).unwrap();
        assert!(r.min_covariance > -1e-10 && r.negatives == 0 && r.checked > 0);
        let r = min_conditional_covariance(0.3, 1.0, 3).unwrap();
        assert!(r.min_covariance.is_finite());
    }
}
