//! Monte Carlo hitting probabilities of metric balls, exponent fits, the
//! capacity sandwich and kernel density diagnostics for the solution `Y`.
//!
//! Hitting is monitored on the simulation grid only. For each path the
//! minimum of `d(Y_t, z)` over the window is recorded once, so every ball
//! radius and every sub-window is evaluated on the same paths and the
//! estimates are exactly monotone.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_of_set, CapacityConfig, TargetSet};
use crate::distance::{ball_volume, MetricHandle, SpotCheck};
use crate::error::{Error, Result};
use crate::fields::VectorFieldSystem;
use crate::gaussian::{FbmMethod, FbmSampler, FbmSpec, SampledPath};
use crate::rde::{default_level, EulerTable};
use crate::rng;
use crate::stats::{self, Proportion};

const TAG_PATHS: u64 = 0x417;
const TAG_DENSITY: u64 = 0xDE;
const TAG_MARGINAL: u64 = 0xD0;
const TAG_CONE: u64 = 0xC0;
const TAG_CONE_VOLUME: u64 = 0xC1;

const CONFIDENCE: f64 = 0.95;

/// Solves the system along `n_paths` fBM drivers on a uniform grid of
/// `[0, horizon]` and maps each solution through `f` (paths are not kept).
#[allow(clippy::too_many_arguments)]
pub fn simulate<T: Send>(
    system: &VectorFieldSystem,
    hurst: f64,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
    y0: &[f64],
    f: impl Fn(u64, &SampledPath) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let sampler = FbmSampler::new(FbmSpec::uniform(hurst, horizon, steps, system.d())?, FbmMethod::Circulant)?;
    let table = EulerTable::new(system, default_level(hurst, system.lbar()))?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let driver = sampler.sample(&mut rng::stream(seed, TAG_PATHS, i));
            let y = table.solve(&driver, 1, 1, y0)?;
            f(i, &y)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitExperiment {
    pub hurst: f64,
    /// Observation window `[a, b]` with `0 < a < b ≤ horizon`.
    pub window: (f64, f64),
    pub center: Vec<f64>,
    pub radius: f64,
    pub y0: Vec<f64>,
    pub n_paths: usize,
    /// Uniform steps on `[0, horizon]`.
    pub steps: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl HitExperiment {
    pub fn validate(&self, system: &VectorFieldSystem) -> Result<()> {
        let (a, b) = self.window;
        if !(0.0 < a && a < b && b <= self.horizon) {
            return Err(Error::Config(format!("window [{a}, {b}] must satisfy 0 < a < b <= horizon")));
        }
        if !(0.0 < self.hurst && self.hurst < 1.0) {
            return Err(Error::Domain(format!("Hurst parameter {} outside (0, 1)", self.hurst)));
        }
        if self.center.len() != system.n() || self.y0.len() != system.n() {
            return Err(Error::Dimension(format!("points must lie in R^{}", system.n())));
        }
        if self.n_paths == 0 || self.steps < 2 {
            return Err(Error::Config("need paths and at least two steps".into()));
        }
        Ok(())
    }

    fn window_indices(&self) -> (usize, usize) {
        let dt = self.horizon / self.steps as f64;
        let ia = ((self.window.0 / dt) - 1e-9).ceil() as usize;
        let ib = ((self.window.1 / dt) + 1e-9).floor() as usize;
        (ia, ib.min(self.steps))
    }
}

#[derive(Clone, Debug)]
struct PathMinimum {
    fine: f64,
    /// Minimum over every other grid time.
    coarse: f64,
    argmin: Vec<f64>,
    mean_step: f64,
}

fn path_minima(system: &VectorFieldSystem, metric: &MetricHandle, exp: &HitExperiment) -> Result<Vec<PathMinimum>> {
    exp.validate(system)?;
    let (ia, ib) = exp.window_indices();
    simulate(system, exp.hurst, exp.horizon, exp.steps, exp.n_paths, exp.seed, &exp.y0, |_, y| {
        let mut m = PathMinimum { fine: f64::INFINITY, coarse: f64::INFINITY, argmin: vec![], mean_step: 0.0 };
        let mut arg = ia;
        for k in ia..=ib {
            let d = metric.distance(&exp.center, y.point(k))?;
            if d < m.fine {
                m.fine = d;
                arg = k;
            }
            if k % 2 == 0 {
                m.coarse = m.coarse.min(d);
            }
            if k > ia {
                m.mean_step += metric.distance(y.point(k - 1), y.point(k))?;
            }
        }
        m.mean_step /= (ib - ia).max(1) as f64;
        m.argmin = y.point(arg).to_vec();
        Ok(m)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitEstimate {
    pub radius: f64,
    pub estimate: Proportion,
    /// Same paths monitored on every other grid time.
    pub coarse: Proportion,
    /// Fine and coarse estimates differ by less than the larger CI width.
    pub mesh_stable: bool,
    /// Mean per-step displacement over the window divided by the radius.
    pub step_to_radius: f64,
}

fn estimate_for(minima: &[PathMinimum], radius: f64) -> HitEstimate {
    let n = minima.len();
    let fine = stats::wilson(minima.iter().filter(|m| m.fine <= radius).count(), n, CONFIDENCE);
    let coarse = stats::wilson(minima.iter().filter(|m| m.coarse <= radius).count(), n, CONFIDENCE);
    let width = (fine.upper - fine.lower).max(coarse.upper - coarse.lower);
    let mean_step = minima.iter().map(|m| m.mean_step).sum::<f64>() / n as f64;
    HitEstimate {
        radius,
        mesh_stable: (fine.estimate - coarse.estimate).abs() <= width,
        estimate: fine,
        coarse,
        step_to_radius: mean_step / radius,
    }
}

/// Exact-distance check of the gauge on the closest approach of every
/// 20th path (at most `cap`).
fn exact_spot_check(metric: &MetricHandle, center: &[f64], minima: &[PathMinimum], cap: usize) -> Result<Option<SpotCheck>> {
    if metric.gauge().is_none() || metric.calibration().is_none() {
        return Ok(None);
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = minima.iter().map(|m| (center.to_vec(), m.argmin.clone())).collect();
    metric.spot_check(&pairs, 0.05, cap).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitReport {
    pub estimate: HitEstimate,
    pub exact_check: Option<SpotCheck>,
}

/// `P(Y_t ∈ B_d(center, radius) for some grid time t in the window)`.
pub fn hitting_probability(system: &VectorFieldSystem, metric: &MetricHandle, exp: &HitExperiment) -> Result<HitReport> {
    let minima = path_minima(system, metric, exp)?;
    Ok(HitReport { estimate: estimate_for(&minima, exp.radius), exact_check: exact_spot_check(metric, &exp.center, &minima, 20)? })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub hurst: f64,
    /// Homogeneous dimension at the target.
    pub q: f64,
    /// `max(Q − 1/H, 0)`.
    pub expected: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub points: Vec<HitEstimate>,
    /// Rungs with fewer than 50 hits, left out of the fit.
    pub starved: Vec<f64>,
    /// `P̂(ε_min) / P̂(ε_max)` over the fitted rungs.
    pub ratio_min_max: f64,
    pub exact_check: Option<SpotCheck>,
}

/// Log-log regression of the hitting probability on the ball radius.
pub fn hitting_exponent_fit(
    system: &VectorFieldSystem,
    metric: &MetricHandle,
    exp: &HitExperiment,
    radii: &[f64],
) -> Result<ExponentFit> {
    if radii.len() < 4 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Config("need at least four positive radii".into()));
    }
    let q = system.growth_and_q(&[exp.center.clone()])?.q[0] as f64;
    let minima = path_minima(system, metric, exp)?;
    let all: Vec<HitEstimate> = radii.iter().map(|&r| estimate_for(&minima, r)).collect();
    let (fitted, starved): (Vec<&HitEstimate>, Vec<&HitEstimate>) = all.iter().partition(|e| e.estimate.successes >= 50);
    if fitted.len() < 2 {
        return Err(Error::Config("fewer than two rungs with at least 50 hits".into()));
    }
    let lx: Vec<f64> = fitted.iter().map(|e| e.radius.ln()).collect();
    let ly: Vec<f64> = fitted.iter().map(|e| e.estimate.estimate.ln()).collect();
    let fit = stats::fit_line(&lx, &ly);
    let lo = fitted.iter().min_by(|a, b| a.radius.total_cmp(&b.radius)).expect("nonempty");
    let hi = fitted.iter().max_by(|a, b| a.radius.total_cmp(&b.radius)).expect("nonempty");
    Ok(ExponentFit {
        hurst: exp.hurst,
        q,
        expected: (q - 1.0 / exp.hurst).max(0.0),
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        ratio_min_max: lo.estimate.estimate / hi.estimate.estimate,
        starved: starved.iter().map(|e| e.radius).collect(),
        points: all,
        exact_check: exact_spot_check(metric, &exp.center, &minima, 20)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub radius: f64,
    pub hit: Proportion,
    /// `Cap_{Q−1/H−η₁}`.
    pub cap_upper_index: f64,
    /// `Cap_{Q−1/H+η₂}`.
    pub cap_lower_index: f64,
    /// `P̂ / Cap_{Q−1/H−η₁}`, bounded above by the theorem.
    pub ratio_upper: f64,
    /// `P̂ / Cap_{Q−1/H+η₂}`, bounded below by the theorem.
    pub ratio_lower: f64,
    pub positivity: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub hurst: f64,
    pub q: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub rows: Vec<SandwichRow>,
    /// Fitted `Ĉ₁ = max P̂ / Cap_{α₋}`.
    pub c1_hat: f64,
    /// Fitted `Ĉ₂ = min P̂ / Cap_{α₊}`.
    pub c2_hat: f64,
    pub span_upper: f64,
    pub span_lower: f64,
    /// `Cap_{α₊} > 0 ⟹ P̂` has a positive lower confidence bound, on every row.
    pub positivity_holds: bool,
    /// Both ratio sequences vary by less than a factor 10.
    pub ratios_bounded: bool,
    pub exact_check: Option<SpotCheck>,
    /// The theorem's constants are unknown; only positivity and bounded
    /// ratios are asserted.
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichConfig {
    pub eta1: f64,
    pub eta2: f64,
    /// Shrinking ball radii around `experiment.center`.
    pub radii: Vec<f64>,
    pub cap_points: usize,
}

/// Compares hitting probabilities of a ball family with capacities of
/// indices `Q − 1/H ∓ η`.
pub fn capacity_sandwich_check(
    system: &VectorFieldSystem,
    metric: &MetricHandle,
    exp: &HitExperiment,
    config: &SandwichConfig,
) -> Result<SandwichReport> {
    if !(config.eta1 > 0.0 && config.eta2 > 0.0) || config.radii.is_empty() {
        return Err(Error::Config("need η₁, η₂ > 0 and at least one radius".into()));
    }
    let q = system.growth_and_q(&[exp.center.clone()])?.q[0] as f64;
    let base = q - 1.0 / exp.hurst;
    let (alpha_minus, alpha_plus) = (base - config.eta1, base + config.eta2);
    let minima = path_minima(system, metric, exp)?;
    let mut rows = Vec::new();
    for (k, &r) in config.radii.iter().enumerate() {
        let hit = estimate_for(&minima, r).estimate;
        let set = TargetSet::Ball { center: exp.center.clone(), radius: r };
        let seed = rng::child_seed(exp.seed, k as u64);
        let cap = |alpha| capacity_of_set(&set, &CapacityConfig::new(alpha, metric.clone()), config.cap_points, seed);
        let (cu, cl) = (cap(alpha_minus)?.capacity, cap(alpha_plus)?.capacity);
        rows.push(SandwichRow {
            radius: r,
            positivity: !(cl > 0.0) || hit.lower > 0.0,
            ratio_upper: hit.estimate / cu,
            ratio_lower: hit.estimate / cl,
            hit,
            cap_upper_index: cu,
            cap_lower_index: cl,
        });
    }
    let span = |f: &dyn Fn(&SandwichRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (span_upper, span_lower) = (span(&|r| r.ratio_upper), span(&|r| r.ratio_lower));
    Ok(SandwichReport {
        hurst: exp.hurst,
        q,
        alpha_minus,
        alpha_plus,
        c1_hat: rows.iter().map(|r| r.ratio_upper).fold(0.0, f64::max),
        c2_hat: rows.iter().map(|r| r.ratio_lower).fold(f64::INFINITY, f64::min),
        positivity_holds: rows.iter().all(|r| r.positivity),
        ratios_bounded: span_upper < 10.0 && span_lower < 10.0,
        span_upper,
        span_lower,
        rows,
        exact_check: exact_spot_check(metric, &exp.center, &minima, 20)?,
        note: "constants C1, C2 are unknown; positivity and ratio boundedness only".into(),
    })
}

/// Gaussian kernel density estimate with bandwidth matrix
/// `h² Σ̂`, `h = factor · n^{-1/(d+4)}` (Scott's rule at factor 1).
#[derive(Clone, Debug)]
pub struct Kde {
    dim: usize,
    n: usize,
    /// Samples in coordinates whitened by the bandwidth matrix.
    whitened: Vec<f64>,
    /// Lower Cholesky factor of the bandwidth matrix.
    chol: DMatrix<f64>,
    norm: f64,
    pub factor: f64,
}

impl Kde {
    pub fn scott(samples: &[Vec<f64>]) -> Result<Self> {
        Self::with_factor(samples, 1.0)
    }

    pub fn with_factor(samples: &[Vec<f64>], factor: f64) -> Result<Self> {
        let n = samples.len();
        let dim = samples.first().map_or(0, Vec::len);
        if n < dim + 2 || dim == 0 {
            return Err(Error::Domain("too few samples for a kernel density estimate".into()));
        }
        let mean: Vec<f64> = (0..dim).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
        let mut cov = DMatrix::zeros(dim, dim);
        for s in samples {
            let c = DVector::from_iterator(dim, s.iter().zip(&mean).map(|(a, m)| a - m));
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        let h = factor * (n as f64).powf(-1.0 / (dim as f64 + 4.0));
        let bw = cov * (h * h);
        let chol = crate::gaussian::sampler::cholesky_with_jitter(bw)?.l();
        let mut whitened = Vec::with_capacity(n * dim);
        for s in samples {
            let z = chol.solve_lower_triangular(&DVector::from_column_slice(s)).ok_or_else(|| Error::NotPositiveDefinite("bandwidth".into()))?;
            whitened.extend(z.iter());
        }
        let det: f64 = chol.diagonal().iter().product();
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powf(dim as f64 / 2.0) * det * n as f64);
        Ok(Kde { dim, n, whitened, chol, norm, factor })
    }

    fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let z = self.chol.solve_lower_triangular(&DVector::from_column_slice(x)).expect("factor is nonsingular");
        z.iter().copied().collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let z = self.whiten(x);
        let total: f64 = self
            .whitened
            .chunks(self.dim)
            .map(|s| (-0.5 * s.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp())
            .sum();
        total * self.norm
    }

    /// Samples within one bandwidth (Mahalanobis) of `x`.
    pub fn neighbours(&self, x: &[f64]) -> usize {
        let z = self.whiten(x);
        self.whitened.chunks(self.dim).filter(|s| s.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= 1.0).count()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// KDE evaluated at `x`, widening the bandwidth by 1.5 up to five times
/// while fewer than 10 samples lie within one bandwidth.
fn kde_eval_widening(samples: &[Vec<f64>], base: &Kde, x: &[f64], widened: &mut usize) -> Result<f64> {
    if base.neighbours(x) >= 10 {
        return Ok(base.eval(x));
    }
    let mut factor = base.factor;
    for _ in 0..5 {
        factor *= 1.5;
        let k = Kde::with_factor(samples, factor)?;
        if k.neighbours(x) >= 10 {
            *widened += 1;
            return Ok(k.eval(x));
        }
    }
    *widened += 1;
    Ok(Kde::with_factor(samples, factor)?.eval(x))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub density: f64,
    pub ball_volume: f64,
    /// `p̂(s, t, x, y) · |B_d(x, (t−s)^H)|`.
    pub ratio: f64,
    /// Same with half the paths.
    pub ratio_half: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityBoundReport {
    pub hurst: f64,
    pub s: f64,
    pub t: f64,
    pub radius: f64,
    pub n_paths: usize,
    pub pairs: Vec<ConePair>,
    pub sup_ratio: f64,
    pub sup_ratio_half: f64,
    /// `sup_ratio / sup_ratio_half − 1`.
    pub growth: f64,
    /// Evaluations where the bandwidth had to be widened.
    pub widened: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub hurst: f64,
    pub s: f64,
    pub t: f64,
    pub n_paths: usize,
    pub n_pairs: usize,
    /// Uniform steps on `[0, t]`; `s` must be a grid time.
    pub steps: usize,
    pub y0: Vec<f64>,
    pub seed: u64,
    #[serde(default = "volume_samples")]
    pub volume_samples: usize,
}

fn volume_samples() -> usize {
    20_000
}

fn two_time_samples(system: &VectorFieldSystem, cfg: &DensityConfig) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < cfg.s && cfg.s < cfg.t) || cfg.n_paths < 4 {
        return Err(Error::Config("need 0 < s < t and at least four paths".into()));
    }
    let is = cfg.s / cfg.t * cfg.steps as f64;
    if (is - is.round()).abs() > 1e-9 {
        return Err(Error::OffGrid(cfg.s));
    }
    let is = is.round() as usize;
    simulate(system, cfg.hurst, cfg.t, cfg.steps, cfg.n_paths, rng::child_seed(cfg.seed, TAG_DENSITY), &cfg.y0, |_, y| {
        let mut v = y.point(is).to_vec();
        v.extend_from_slice(y.point(cfg.steps));
        Ok(v)
    })
}

/// KDE of the law of `(Y_s, Y_t)` against `1/|B_d(x, (t−s)^H)|` on pairs
/// with `x` drawn from the time-`s` cloud and `y ∈ B_d(x, (t−s)^H)`.
pub fn joint_density_bound_check(
    system: &VectorFieldSystem,
    metric: &MetricHandle,
    cfg: &DensityConfig,
) -> Result<DensityBoundReport> {
    let n = system.n();
    let samples = two_time_samples(system, cfg)?;
    let half = &samples[..cfg.n_paths / 2];
    let (kde, kde_half) = (Kde::scott(&samples)?, Kde::scott(half)?);
    let radius = (cfg.t - cfg.s).powf(cfg.hurst);
    let mut widened = 0;
    let mut pairs = Vec::new();
    for k in 0..cfg.n_pairs.min(cfg.n_paths) {
        let x = samples[k][..n].to_vec();
        let ball = TargetSet::Ball { center: x.clone(), radius };
        let y = ball.sample(metric, 1, rng::child_seed(cfg.seed, TAG_CONE ^ k as u64))?.remove(0);
        let vol = ball_volume(metric, &x, radius, cfg.volume_samples, rng::child_seed(cfg.seed, TAG_CONE_VOLUME))?.value;
        let xy: Vec<f64> = x.iter().chain(&y).copied().collect();
        let density = kde_eval_widening(&samples, &kde, &xy, &mut widened)?;
        let density_half = kde_eval_widening(half, &kde_half, &xy, &mut widened)?;
        pairs.push(ConePair { ratio: density * vol, ratio_half: density_half * vol, x, y, density, ball_volume: vol });
    }
    let sup_ratio = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let sup_ratio_half = pairs.iter().map(|p| p.ratio_half).fold(0.0, f64::max);
    Ok(DensityBoundReport {
        hurst: cfg.hurst,
        s: cfg.s,
        t: cfg.t,
        radius,
        n_paths: cfg.n_paths,
        pairs,
        sup_ratio,
        sup_ratio_half,
        growth: sup_ratio / sup_ratio_half - 1.0,
        widened,
    })
}

/// Joint KDE of `(Y_s, Y_t)` at arbitrary pairs `(x, y)`.
pub fn joint_density_at(system: &VectorFieldSystem, cfg: &DensityConfig, points: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<f64>> {
    let samples = two_time_samples(system, cfg)?;
    let kde = Kde::scott(&samples)?;
    Ok(points.iter().map(|(x, y)| kde.eval(&x.iter().chain(y).copied().collect::<Vec<_>>())).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalDensity {
    pub t: f64,
    pub n_paths: usize,
    pub grid: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub min_value: f64,
}

/// KDE of the law of `Y_t` on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn marginal_density_kde(
    system: &VectorFieldSystem,
    hurst: f64,
    t: f64,
    steps: usize,
    n_paths: usize,
    y0: &[f64],
    grid: &[Vec<f64>],
    seed: u64,
) -> Result<MarginalDensity> {
    if !(t > 0.0) {
        return Err(Error::Domain("marginal density needs t > 0".into()));
    }
    let samples = simulate(system, hurst, t, steps, n_paths, rng::child_seed(seed, TAG_MARGINAL), y0, |_, y| Ok(y.point(steps).to_vec()))?;
    let kde = Kde::scott(&samples)?;
    let values: Vec<f64> = grid.par_iter().map(|x| kde.eval(x)).collect();
    Ok(MarginalDensity {
        t,
        n_paths,
        grid: grid.to_vec(),
        min_value: values.iter().copied().fold(f64::INFINITY, f64::min),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::calibrated_gauge;
    use crate::fields::builtin;

    fn gauge(name: &str) -> (VectorFieldSystem, MetricHandle) {
        let s = builtin(name).unwrap();
        let m = calibrated_gauge(&s, 8, 1).unwrap();
        (s, m)
    }

    fn experiment(n: usize, hurst: f64, center: Vec<f64>, radius: f64) -> HitExperiment {
        HitExperiment {
            hurst,
            window: (0.25, 1.0),
            y0: vec![0.0; center.len()],
            center,
            radius,
            n_paths: n,
            steps: 512,
            horizon: 1.0,
            seed: 4,
        }
    }

    #[test]
    fn trivial_targets() {
        let (s, m) = gauge("elliptic2");
        let huge = hitting_probability(&s, &m, &experiment(400, 0.5, vec![0.0, 0.0], 100.0)).unwrap();
        assert_eq!(huge.estimate.estimate.estimate, 1.0);
        let far = hitting_probability(&s, &m, &experiment(2000, 0.5, vec![10.0, 0.0], 0.5)).unwrap();
        assert!(far.estimate.estimate.upper < 0.01);
    }

    #[test]
    fn monotone_in_radius_and_window() {
        let (s, m) = gauge("heisenberg");
        let mut exp = experiment(500, 0.5, vec![0.3, 0.3, 0.05], 0.3);
        let fit = hitting_exponent_fit(&s, &m, &exp, &[0.5, 0.4, 0.3, 0.2]).unwrap();
        assert!(fit.points.windows(2).all(|w| w[1].estimate.successes <= w[0].estimate.successes));
        let wide = hitting_probability(&s, &m, &exp).unwrap().estimate.estimate.successes;
        exp.window = (0.5, 0.75);
        let narrow = hitting_probability(&s, &m, &exp).unwrap().estimate.estimate.successes;
        assert!(narrow <= wide);
        assert_eq!(fit.q, 4.0);
    }

    #[test]
    fn seeds_agree_within_intervals() {
        let (s, m) = gauge("elliptic2");
        let mut exp = experiment(3000, 0.75, vec![0.3, 0.3], 0.1);
        let a = hitting_probability(&s, &m, &exp).unwrap().estimate.estimate;
        exp.seed = 99;
        let b = hitting_probability(&s, &m, &exp).unwrap().estimate.estimate;
        assert!(a.lower <= b.upper && b.lower <= a.upper, "{a:?} {b:?}");
    }

    #[test]
    fn kde_matches_gaussian() {
        // independent oracle: exact standard normal density
        let s = builtin("elliptic1").unwrap();
        let grid: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64 * 0.1]).collect();
        let md = marginal_density_kde(&s, 0.5, 1.0, 64, 100_000, &[0.0], &grid, 3).unwrap();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let err = grid.iter().zip(&md.values).map(|(x, v)| (v - phi(x[0])).abs()).fold(0.0, f64::max);
        assert!(err / phi(0.0) < 0.05, "{err}");
        // symmetry of the driving noise
        for i in 1..=10 {
            let (l, r) = (md.values[20 - i], md.values[20 + i]);
            assert!((l / r - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn heisenberg_marginal_positive() {
        let s = builtin("heisenberg").unwrap();
        let grid: Vec<Vec<f64>> = (0..27).map(|k| vec![(k % 3) as f64 * 0.5 - 0.5, ((k / 3) % 3) as f64 * 0.5 - 0.5, (k / 9) as f64 * 0.2 - 0.2]).collect();
        let md = marginal_density_kde(&s, 0.5, 1.0, 256, 4000, &[0.0; 3], &grid, 8).unwrap();
        assert!(md.min_value > 0.0);
    }

    #[test]
    fn brownian_joint_density_against_closed_form() {
        let (s, m) = gauge("elliptic1");
        let cfg = DensityConfig { hurst: 0.5, s: 0.5, t: 0.6, n_paths: 40_000, n_pairs: 10, steps: 60, y0: vec![0.0], seed: 5, volume_samples: 2000 };
        let r = joint_density_bound_check(&s, &m, &cfg).unwrap();
        let g = |v: f64, x: f64| (-0.5 * x * x / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let exact_sup = r.pairs.iter().map(|p| g(0.5, p.x[0]) * g(0.1, p.y[0] - p.x[0]) * 2.0 * r.radius).fold(0.0, f64::max);
        assert!((r.sup_ratio / exact_sup - 1.0).abs() < 0.25, "{} {}", r.sup_ratio, exact_sup);
        // off the cone the density is negligible
        let off = joint_density_at(&s, &cfg, &[(vec![0.0], vec![2.5])]).unwrap()[0];
        assert!(off < 1e-3 * r.sup_ratio / (2.0 * r.radius));
    }
}
