//! Sub-Riemannian control distance by constrained energy minimization,
//! calibrated gauges, ball-box and volume diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorFieldSystem;
use crate::optim::{augmented_lagrangian, ConstrainedEval, LbfgsOptions, PenaltyOptions};
use crate::rde::FlowMap;
use crate::rng;

const TAG_RESTART: u64 = 0xD1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceQuery {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Piecewise-linear control segments `m`.
    pub segments: usize,
    pub restarts: usize,
    /// Initial penalty weight.
    pub rho0: f64,
    /// Endpoint residual required for feasibility.
    pub tol: f64,
    /// RK4 steps per control segment.
    pub substeps: usize,
    pub seed: u64,
}

impl DistanceQuery {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        DistanceQuery { x, y, segments: 32, restarts: 8, rho0: 10.0, tol: 1e-8, substeps: 2, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceResult {
    /// Length of the best feasible control, an upper bound on `d(x, y)`.
    pub value: f64,
    /// `‖Π_1(x, h) − y‖` of that control.
    pub residual: f64,
    /// Control increments, segment-major (`m × d`).
    pub control: Vec<f64>,
    /// Restarts that met the residual tolerance.
    pub feasible_restarts: usize,
}

/// Minimizes `‖ḣ‖²_{L²}` subject to `Π_1(x, h) = y` over piecewise-linear
/// controls, from several starting controls. The reported value is the
/// length of the best control (equal to the energy's square root after the
/// constant-speed reparametrization).
pub fn control_distance(system: &VectorFieldSystem, q: &DistanceQuery) -> Result<DistanceResult> {
    let (n, d) = (system.n(), system.d());
    if q.x.len() != n || q.y.len() != n {
        return Err(Error::Dimension(format!("points must lie in R^{n}")));
    }
    if system.drift().is_some() {
        return Err(Error::Domain("control distance is defined for driftless systems only".into()));
    }
    if q.segments == 0 {
        return Err(Error::Config("need at least one control segment".into()));
    }
    let gap: f64 = q.x.iter().zip(&q.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let m = q.segments;
    if gap == 0.0 {
        return Ok(DistanceResult { value: 0.0, residual: 0.0, control: vec![0.0; m * d], feasible_restarts: q.restarts });
    }
    let flow = FlowMap::new(system, q.substeps);
    let mf = m as f64;
    let eval = |h: &[f64]| -> ConstrainedEval {
        let r = flow.solve(&q.x, h, true).expect("validated shapes");
        let j = r.jacobian.expect("requested");
        let constraints: Vec<f64> = r.end.iter().zip(&q.y).map(|(a, b)| a - b).collect();
        let mut jacobian = vec![0.0; n * m * d];
        for row in 0..n {
            for col in 0..m * d {
                jacobian[row * m * d + col] = j[(row, col)];
            }
        }
        ConstrainedEval {
            objective: mf * h.iter().map(|v| v * v).sum::<f64>(),
            gradient: h.iter().map(|v| 2.0 * mf * v).collect(),
            constraints,
            jacobian,
        }
    };
    let opts = PenaltyOptions {
        rho0: q.rho0,
        tol: q.tol,
        max_outer: 40,
        inner: LbfgsOptions { max_iter: 300, grad_tol: 1e-10, ..Default::default() },
    };
    let scale = gap.max(gap.powf(1.0 / system.lbar() as f64));
    let starts: Vec<Vec<f64>> = (0..q.restarts.max(1))
        .map(|r| {
            if r == 0 {
                straight_start(system, &q.x, &q.y, m)
            } else {
                let mut g = rng::stream(q.seed, TAG_RESTART, r as u64);
                (0..m * d).map(|_| g.gen_range(-1.0..1.0) * scale / mf.sqrt()).collect()
            }
        })
        .collect();
    let solutions: Vec<_> = starts.par_iter().map(|x0| augmented_lagrangian(eval, x0, opts)).collect();
    let mut best: Option<DistanceResult> = None;
    let mut feasible = 0;
    let mut best_residual = f64::INFINITY;
    for sol in solutions {
        best_residual = best_residual.min(sol.residual);
        if sol.residual > q.tol {
            continue;
        }
        feasible += 1;
        let value: f64 = sol.x.chunks(d).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(DistanceResult { value, residual: sol.residual, control: sol.x, feasible_restarts: 0 });
        }
    }
    let mut best = best.ok_or(Error::Infeasible { residual: best_residual })?;
    best.feasible_restarts = feasible;
    Ok(best)
}

/// Least-squares horizontal direction at `x`, spread evenly over `m` segments.
fn straight_start(system: &VectorFieldSystem, x: &[f64], y: &[f64], m: usize) -> Vec<f64> {
    let n = system.n();
    let d = system.d();
    let a = nalgebra::DMatrix::from_fn(n, d, |r, c| system.fields()[c].eval(x)[r]);
    let b = nalgebra::DVector::from_iterator(n, y.iter().zip(x).map(|(p, q)| p - q));
    let coef = a.svd(true, true).solve(&b, 1e-12).unwrap_or_else(|_| nalgebra::DVector::zeros(d));
    (0..m).flat_map(|_| coef.iter().map(|c| c / m as f64).collect::<Vec<_>>()).collect()
}


const TAG_CALIBRATION: u64 = 0xCA1;
const TAG_VOLUME: u64 = 0x70;
const TAG_PAIRS: u64 = 0x9A;

/// `κ` of the Heisenberg gauge, fixed by `d(0, (0,0,c)) = 2√(π|c|)`.
pub const HEISENBERG_KAPPA: f64 = 16.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Explicit gauges available for built-in systems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    Euclidean,
    /// `((Δa² + Δb²)² + κ z²)^{1/4}` with `z` the symmetric vertical
    /// coordinate of `x^{-1} y`.
    Heisenberg { kappa: f64 },
}

impl Gauge {
    /// The gauge registered for a built-in system, if any.
    pub fn for_system(system: &VectorFieldSystem) -> Option<Gauge> {
        let reference = crate::fields::builtin(system.name()).ok()?;
        if reference != *system {
            return None;
        }
        match system.name() {
            "elliptic1" | "elliptic2" => Some(Gauge::Euclidean),
            "heisenberg" => Some(Gauge::Heisenberg { kappa: HEISENBERG_KAPPA }),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Gauge::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            Gauge::Heisenberg { kappa } => {
                let (da, db) = (y[0] - x[0], y[1] - x[1]);
                let z = y[2] - x[2] - x[0] * db - 0.5 * da * db;
                ((da * da + db * db).powi(2) + kappa * z * z).powf(0.25)
            }
        }
    }

    /// Euclidean box containing `{y : gauge(x, y) ≤ ρ}`.
    pub fn bounding_box(&self, x: &[f64], rho: f64) -> (Vec<f64>, Vec<f64>) {
        let half: Vec<f64> = match self {
            Gauge::Euclidean => vec![rho; x.len()],
            Gauge::Heisenberg { kappa } => {
                vec![rho, rho, rho * rho / kappa.sqrt() + x[0].abs() * rho + 0.5 * rho * rho]
            }
        };
        (x.iter().zip(&half).map(|(a, h)| a - h).collect(), x.iter().zip(&half).map(|(a, h)| a + h).collect())
    }
}

/// Two-sided equivalence constants: `lower ≤ d / gauge ≤ upper` on the
/// calibration pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub pairs: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Calibration {
    pub fn spread(&self) -> f64 {
        self.upper / self.lower
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    Exact,
    Gauge,
}

/// Access to `d` either by optimization or through a calibrated gauge.
#[derive(Clone, Debug)]
pub struct MetricHandle {
    system: VectorFieldSystem,
    mode: MetricMode,
    gauge: Option<Gauge>,
    calibration: Option<Calibration>,
    /// Template for exact queries (points are overwritten).
    pub query: DistanceQuery,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpotCheck {
    pub checked: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// All exact/gauge ratios inside the calibrated band widened by 5%.
    pub within_band: bool,
}

impl MetricHandle {
    pub fn exact(system: VectorFieldSystem) -> Self {
        let gauge = Gauge::for_system(&system);
        MetricHandle { system, mode: MetricMode::Exact, gauge, calibration: None, query: DistanceQuery::new(vec![], vec![]) }
    }

    pub fn system(&self) -> &VectorFieldSystem {
        &self.system
    }

    pub fn mode(&self) -> MetricMode {
        self.mode
    }

    pub fn gauge(&self) -> Option<Gauge> {
        self.gauge
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.calibration
    }

    pub fn exact_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let q = DistanceQuery { x: x.to_vec(), y: y.to_vec(), ..self.query.clone() };
        Ok(control_distance(&self.system, &q)?.value)
    }

    /// `d(x, y)` in the handle's mode.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match (self.mode, self.gauge) {
            (MetricMode::Gauge, Some(g)) => Ok(g.eval(x, y)),
            _ => self.exact_distance(x, y),
        }
    }

    /// A Euclidean box guaranteed (up to the calibration) to contain `B_d(x, r)`.
    pub fn bounding_box(&self, x: &[f64], r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.gauge.ok_or_else(|| Error::Domain("bounding boxes need a registered gauge".into()))?;
        let rho = match (self.mode, self.calibration) {
            (MetricMode::Gauge, _) => r,
            (MetricMode::Exact, Some(c)) => 1.05 * r / c.lower,
            (MetricMode::Exact, None) if g == Gauge::Euclidean => r,
            (MetricMode::Exact, None) => {
                return Err(Error::Domain("exact-mode boxes need a calibrated gauge".into()));
            }
        };
        Ok(g.bounding_box(x, rho))
    }

    /// Compares exact distances with the gauge on every `1/fraction`-th pair
    /// (at most `cap` pairs).
    pub fn spot_check(&self, pairs: &[(Vec<f64>, Vec<f64>)], fraction: f64, cap: usize) -> Result<SpotCheck> {
        let g = self.gauge.ok_or_else(|| Error::Domain("spot checks need a gauge".into()))?;
        let step = ((1.0 / fraction).round() as usize).max(1);
        let chosen: Vec<&(Vec<f64>, Vec<f64>)> = pairs.iter().step_by(step).take(cap).collect();
        let ratios: Vec<f64> = chosen
            .par_iter()
            .map(|(x, y)| {
                let gv = g.eval(x, y);
                if gv == 0.0 {
                    return Ok(1.0);
                }
                Ok(self.exact_distance(x, y)? / gv)
            })
            .collect::<Result<_>>()?;
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = self.calibration.map_or((1.0, 1.0), |c| (c.lower, c.upper));
        let within_band = ratios.iter().all(|&r| r >= lo / 1.05 && r <= hi * 1.05);
        Ok(SpotCheck { checked: ratios.len(), min_ratio, max_ratio, within_band })
    }
}

/// `n` pairs with `x` uniform in `[-w, w]^N` and `y − x` uniform in the
/// Euclidean unit ball.
pub fn sample_pairs(dim: usize, n: usize, half_width: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n as u64)
        .map(|i| {
            let mut g = rng::stream(seed, TAG_PAIRS, i);
            let x: Vec<f64> = (0..dim).map(|_| g.gen_range(-half_width..half_width)).collect();
            let dir: Vec<f64> = loop {
                let v: Vec<f64> = (0..dim).map(|_| g.gen_range(-1.0..1.0)).collect();
                let r2: f64 = v.iter().map(|a| a * a).sum();
                if r2 <= 1.0 && r2 > 1e-12 {
                    break v;
                }
            };
            let y = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            (x, y)
        })
        .collect()
}

/// Gauge mode with equivalence constants measured against the exact
/// distance on `pairs` sample pairs. Refuses when the constants spread by
/// more than a factor 3.
pub fn calibrated_gauge(system: &VectorFieldSystem, pairs: usize, seed: u64) -> Result<MetricHandle> {
    let mut handle = MetricHandle::exact(system.clone());
    let gauge = handle.gauge.ok_or_else(|| Error::Domain(format!("no gauge registered for '{}'", system.name())))?;
    let calibration = if gauge == Gauge::Euclidean {
        Calibration { pairs: 0, lower: 1.0, upper: 1.0 }
    } else {
        // one horizontal and one vertical pair, where the gauge is exact,
        // then random pairs
        let mut sample = sample_pairs(system.n(), pairs.max(2), 0.5, rng::child_seed(seed, TAG_CALIBRATION));
        for (k, w) in [[0.6, 0.0, 0.0], [0.0, 0.0, 0.2]].iter().enumerate() {
            let x = sample[k].0.clone();
            sample[k].1 = vec![x[0] + w[0], x[1] + w[1], x[2] + w[2] + x[0] * w[1]];
        }
        let ratios: Vec<f64> = sample
            .par_iter()
            .map(|(x, y)| Ok(handle.exact_distance(x, y)? / gauge.eval(x, y)))
            .collect::<Result<_>>()?;
        Calibration {
            pairs: sample.len(),
            lower: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            upper: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    };
    if calibration.spread() > 3.0 {
        return Err(Error::Domain(format!("gauge calibration spread {:.3} exceeds 3", calibration.spread())));
    }
    handle.mode = MetricMode::Gauge;
    handle.calibration = Some(calibration);
    Ok(handle)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallBoxReport {
    pub pairs: usize,
    pub lbar: usize,
    /// `max ‖x − y‖ / d(x, y)`.
    pub k_lower: f64,
    /// `max d(x, y) / ‖x − y‖^{1/l̄}`.
    pub k_upper: f64,
    pub k_hat: f64,
    pub self_distance_zero: bool,
}

pub fn ball_box_check(handle: &MetricHandle, pairs: &[(Vec<f64>, Vec<f64>)], lbar: usize) -> Result<BallBoxReport> {
    if lbar == 0 {
        return Err(Error::Config("l̄ must be at least 1".into()));
    }
    let rows: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|(x, y)| {
            let e: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if e > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("pair at Euclidean distance {e} > 1")));
            }
            Ok((e, handle.distance(x, y)?, handle.distance(x, x)?))
        })
        .collect::<Result<_>>()?;
    let valid = rows.iter().filter(|r| r.0 > 0.0);
    let k_lower = valid.clone().map(|(e, d, _)| e / d).fold(0.0, f64::max);
    let k_upper = valid.map(|(e, d, _)| d / e.powf(1.0 / lbar as f64)).fold(0.0, f64::max);
    Ok(BallBoxReport {
        pairs: pairs.len(),
        lbar,
        k_lower,
        k_upper,
        k_hat: k_lower.max(k_upper),
        self_distance_zero: rows.iter().all(|r| r.2 == 0.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Monte Carlo volume of `B_d(x, r)` from uniform samples in a bounding box.
/// Sample `i` uses the same uniforms for every `r`.
pub fn ball_volume(handle: &MetricHandle, x: &[f64], r: f64, n_mc: usize, seed: u64) -> Result<VolumeEstimate> {
    if !(r > 0.0) || n_mc == 0 {
        return Err(Error::Domain("ball volume needs r > 0 and samples".into()));
    }
    let (lo, hi) = handle.bounding_box(x, r)?;
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let hits: Vec<bool> = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, TAG_VOLUME, i);
            let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * g.gen::<f64>()).collect();
            Ok(handle.distance(x, &y)? <= r)
        })
        .collect::<Result<_>>()?;
    let p = hits.iter().filter(|&&h| h).count() as f64 / n_mc as f64;
    Ok(VolumeEstimate {
        r,
        value: box_volume * p,
        stderr: box_volume * (p * (1.0 - p) / n_mc as f64).sqrt(),
        n: n_mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::builtin;
    use crate::stats;

    fn heis() -> VectorFieldSystem {
        builtin("heisenberg").unwrap()
    }

    #[test]
    fn elliptic_is_euclidean() {
        let e = builtin("elliptic2").unwrap();
        let r = control_distance(&e, &DistanceQuery::new(vec![0.0, 0.0], vec![3.0, 4.0])).unwrap();
        assert!((r.value - 5.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn heisenberg_axes() {
        let h = heis();
        let r = control_distance(&h, &DistanceQuery::new(vec![0.0; 3], vec![0.7, 0.0, 0.0])).unwrap();
        assert!((r.value - 0.7).abs() < 1e-4, "{r:?}");
        for c in [0.1, 0.5] {
            let r = control_distance(&h, &DistanceQuery::new(vec![0.0; 3], vec![0.0, 0.0, c])).unwrap();
            let exact = 2.0 * (std::f64::consts::PI * c).sqrt();
            assert!((r.value / exact - 1.0).abs() < 0.05, "{r:?}");
        }
    }

    #[test]
    fn symmetry_triangle_dilation() {
        let h = MetricHandle::exact(heis());
        let (x, y, z) = ([0.1, -0.2, 0.3], [0.4, 0.1, -0.1], [-0.2, 0.3, 0.2]);
        let dxy = h.distance(&x, &y).unwrap();
        let dyx = h.distance(&y, &x).unwrap();
        let dyz = h.distance(&y, &z).unwrap();
        let dxz = h.distance(&x, &z).unwrap();
        let tol = 1e-3 * dxy.max(dxz);
        assert!((dxy - dyx).abs() <= 2.0 * tol, "{dxy} {dyx}");
        assert!(dxz <= dxy + dyz + 3.0 * tol);
        let p = [0.3, -0.2, 0.15];
        let d1 = h.distance(&[0.0; 3], &p).unwrap();
        let lam = 2.0;
        let d2 = h.distance(&[0.0; 3], &[lam * p[0], lam * p[1], lam * lam * p[2]]).unwrap();
        assert!((d2 / (lam * d1) - 1.0).abs() < 0.05);
        assert_eq!(h.distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn gauges() {
        let g = Gauge::Heisenberg { kappa: HEISENBERG_KAPPA };
        assert_eq!(g.eval(&[0.3, 0.2, 0.1], &[0.3, 0.2, 0.1]), 0.0);
        let c = 0.5;
        assert!((g.eval(&[0.0; 3], &[0.0, 0.0, c]) - 2.0 * (std::f64::consts::PI * c).sqrt()).abs() < 1e-12);
        // left invariance: gauge(x, x*w) = gauge(0, w)
        let (x, w) = ([0.3, -0.7, 0.2], [0.1, 0.4, -0.3]);
        let xw = [x[0] + w[0], x[1] + w[1], x[2] + w[2] + x[0] * w[1]];
        assert!((g.eval(&x, &xw) - g.eval(&[0.0; 3], &w)).abs() < 1e-12);
        let e = calibrated_gauge(&builtin("elliptic2").unwrap(), 200, 1).unwrap();
        assert_eq!(e.calibration().unwrap(), Calibration { pairs: 0, lower: 1.0, upper: 1.0 });
        assert!(calibrated_gauge(&builtin("engel").unwrap(), 5, 1).is_err());
    }

    #[test]
    fn heisenberg_calibration_band() {
        let h = calibrated_gauge(&heis(), 24, 5).unwrap();
        let c = h.calibration().unwrap();
        // the gauge is exact on both axes and overestimates in between
        assert!(c.lower > 0.5 && c.lower < 1.0 && (c.upper - 1.0).abs() < 1e-2 && c.spread() <= 3.0, "{c:?}");
        let pairs = sample_pairs(3, 40, 0.5, 9);
        let s = h.spot_check(&pairs, 0.1, 4).unwrap();
        assert_eq!(s.checked, 4);
        assert!(s.within_band, "{s:?} {c:?}");
    }

    #[test]
    fn elliptic_ball_box_and_volume() {
        let h = calibrated_gauge(&builtin("elliptic2").unwrap(), 0, 1).unwrap();
        let pairs = sample_pairs(2, 200, 0.5, 3);
        let r = ball_box_check(&h, &pairs, 1).unwrap();
        assert!((r.k_hat - 1.0).abs() < 1e-12 && r.self_distance_zero);
        let v = ball_volume(&h, &[0.0, 0.0], 0.5, 20_000, 2).unwrap();
        let exact = std::f64::consts::PI * 0.25;
        assert!((v.value - exact).abs() < 3.0 * v.stderr, "{v:?}");
        // exact mode agrees with Euclidean on a few pairs
        let ex = MetricHandle::exact(builtin("elliptic2").unwrap());
        let bb = ball_box_check(&ex, &pairs[..5], 1).unwrap();
        assert!((bb.k_hat - 1.0).abs() < 1e-4);
    }

    #[test]
    fn heisenberg_volume_growth() {
        let h = calibrated_gauge(&heis(), 8, 2).unwrap();
        let rs = [0.2, 0.35, 0.5, 0.65, 0.8];
        let vols: Vec<VolumeEstimate> = rs.iter().map(|&r| ball_volume(&h, &[0.1, 0.2, 0.0], r, 4000, 7).unwrap()).collect();
        assert!(vols.windows(2).all(|w| w[0].value <= w[1].value));
        let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = vols.iter().map(|v| v.value.ln()).collect();
        assert!((stats::fit_line(&lx, &ly).slope - 4.0).abs() < 0.3);
    }
}
