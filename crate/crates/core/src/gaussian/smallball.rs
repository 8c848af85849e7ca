use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{roughness::unit_net, FbmMethod, FbmSampler, FbmSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{self, LineFit, Proportion};

const TAG_SMALLBALL: u64 = 0x5B;
const TAG_SPLITTING: u64 = 0x5C;

/// Which functional the small-ball event is taken over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallBallVariant {
    /// `sup_{u,v} |⟨φ, B_{u,v}⟩| ≤ x` for one unit direction.
    Fixed { phi: Vec<f64> },
    /// The same with the infimum over a direction net.
    Net { size: usize },
}

impl SmallBallVariant {
    fn directions(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            SmallBallVariant::Fixed { phi } => {
                let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if phi.len() != dim || !(norm > 0.0) {
                    return Err(Error::Dimension(format!("direction of length {} for dimension {dim}", phi.len())));
                }
                Ok(vec![phi.iter().map(|x| x / norm).collect()])
            }
            SmallBallVariant::Net { size } => Ok(unit_net(dim, *size)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallBallEstimate {
    pub x: f64,
    /// Point estimate; absent when no path stayed in the ball.
    pub estimate: Option<f64>,
    pub interval: Proportion,
}

/// Plain Monte Carlo estimates of the small-ball probability over the grid
/// of `spec`, for each radius in `xs`. Estimates share paths, so they are
/// monotone in `x`.
pub fn small_ball_mc(
    spec: &FbmSpec,
    xs: &[f64],
    variant: &SmallBallVariant,
    n_paths: usize,
    seed: u64,
    method: FbmMethod,
) -> Result<Vec<SmallBallEstimate>> {
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("small-ball radius must be positive".into()));
    }
    let net = variant.directions(spec.dim)?;
    let sampler = FbmSampler::new(spec.clone(), method)?;
    let ranges: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(&mut rng::stream(seed, TAG_SMALLBALL, i));
            net.iter()
                .map(|phi| {
                    let proj = path.project(phi);
                    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
                    hi - lo
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(xs
        .iter()
        .map(|&x| {
            let hits = ranges.iter().filter(|&&r| r <= x).count();
            let interval = stats::wilson(hits, n_paths, 0.95);
            SmallBallEstimate { x, estimate: (hits > 0).then_some(interval.estimate), interval }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingOptions {
    /// Time steps on `[0, 1]`.
    pub steps: usize,
    pub particles: usize,
    /// Selection stages; must divide `steps`.
    pub stages: usize,
    /// Independent replicates used for the standard error.
    pub replicates: usize,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { steps: 1024, particles: 1000, stages: 64, replicates: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplittingEstimate {
    pub x: f64,
    /// Mean over replicates of `log P̂`.
    pub log_p: f64,
    pub log_p_stderr: f64,
    pub replicates: Vec<f64>,
}

/// Durbin–Levinson prediction coefficients of unit-step fractional Gaussian
/// noise, reversed so that the predictor at step `k` is
/// `coeffs[k] · noise[0..k]`, and the innovation variances.
struct Predictor {
    coeffs: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl Predictor {
    fn new(hurst: f64, n: usize) -> Self {
        let p = 2.0 * hurst;
        let gamma: Vec<f64> = (0..=n)
            .map(|k| {
                let k = k as f64;
                0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
            })
            .collect();
        let markov = (hurst - 0.5).abs() < 1e-12;
        let mut coeffs = vec![Vec::new()];
        let mut variances = vec![gamma[0]];
        let mut phi: Vec<f64> = Vec::new();
        for m in 1..n {
            if markov {
                coeffs.push(Vec::new());
                variances.push(1.0);
                continue;
            }
            let v = *variances.last().unwrap();
            let acc: f64 = phi.iter().zip(gamma[1..m].iter().rev()).map(|(a, g)| a * g).sum();
            let a = (gamma[m] - acc) / v;
            let prev = phi.clone();
            for (j, x) in phi.iter_mut().enumerate() {
                *x = prev[j] - a * prev[m - 2 - j];
            }
            phi.push(a);
            variances.push(v * (1.0 - a * a));
            coeffs.push(phi.iter().rev().copied().collect());
        }
        Predictor { coeffs, variances }
    }
}

/// Sequential splitting estimate of the small-ball probability on `[0, 1]`
/// for `d`-dimensional fBM: particles failing the range constraint are
/// discarded at each stage and survivors resampled, so `P̂` is the product of
/// the stage survival fractions. The fBM history is carried per particle and
/// extended exactly by Durbin–Levinson prediction.
pub fn small_ball_splitting(
    hurst: f64,
    dim: usize,
    x: f64,
    variant: &SmallBallVariant,
    opts: &SplittingOptions,
    seed: u64,
) -> Result<SplittingEstimate> {
    let predictor = Predictor::new(hurst, opts.steps);
    splitting_with(&predictor, hurst, dim, x, variant, opts, seed)
}

fn splitting_with(
    predictor: &Predictor,
    hurst: f64,
    dim: usize,
    x: f64,
    variant: &SmallBallVariant,
    opts: &SplittingOptions,
    seed: u64,
) -> Result<SplittingEstimate> {
    FbmSpec::new(hurst, vec![0.0, 1.0], dim)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain("small-ball radius must lie in (0, 1)".into()));
    }
    if opts.stages == 0 || opts.steps % opts.stages != 0 || opts.particles < 2 || opts.replicates < 2 {
        return Err(Error::Config("splitting needs stages dividing steps, >= 2 particles and >= 2 replicates".into()));
    }
    let net = variant.directions(dim)?;
    let replicates: Vec<f64> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(predictor, hurst, dim, x, &net, opts, seed, r))
        .collect();
    if replicates.iter().any(|v| v.is_infinite()) {
        return Err(Error::NonConvergence(format!("all particles left the ball of radius {x}; add particles or stages")));
    }
    let est = stats::mean_estimate(&replicates);
    Ok(SplittingEstimate { x, log_p: est.value, log_p_stderr: est.stderr, replicates })
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    predictor: &Predictor,
    hurst: f64,
    dim: usize,
    x: f64,
    net: &[Vec<f64>],
    opts: &SplittingOptions,
    seed: u64,
    replicate: u64,
) -> f64 {
    let mut rng = rng::stream(seed, TAG_SPLITTING, replicate);
    let (n, np, nd) = (opts.steps, opts.particles, net.len());
    let scale = (1.0 / n as f64).powf(hurst);
    // per particle: noise history (dim × n), position, per-direction max/min
    let mut noise = vec![0.0; np * dim * n];
    let mut pos = vec![0.0; np * dim];
    let mut hi = vec![0.0f64; np * nd];
    let mut lo = vec![0.0f64; np * nd];
    let per_stage = n / opts.stages;
    let mut log_p = 0.0;
    for k in 0..n {
        let coeffs = &predictor.coeffs[k];
        let sd = predictor.variances[k].sqrt();
        for p in 0..np {
            for c in 0..dim {
                let hist = &noise[(p * dim + c) * n..(p * dim + c) * n + k];
                let mean: f64 = coeffs.iter().zip(hist).map(|(a, b)| a * b).sum();
                let z = mean + sd * rng.sample::<f64, _>(StandardNormal);
                noise[(p * dim + c) * n + k] = z;
                pos[p * dim + c] += scale * z;
            }
            let point = &pos[p * dim..(p + 1) * dim];
            for (j, phi) in net.iter().enumerate() {
                let v: f64 = phi.iter().zip(point).map(|(a, b)| a * b).sum();
                hi[p * nd + j] = hi[p * nd + j].max(v);
                lo[p * nd + j] = lo[p * nd + j].min(v);
            }
        }
        if (k + 1) % per_stage == 0 {
            let alive: Vec<usize> =
                (0..np).filter(|&p| (0..nd).any(|j| hi[p * nd + j] - lo[p * nd + j] <= x)).collect();
            if alive.is_empty() {
                return f64::NEG_INFINITY;
            }
            log_p += (alive.len() as f64 / np as f64).ln();
            if k + 1 == n {
                break;
            }
            let picks: Vec<usize> = (0..np).map(|_| alive[rng.gen_range(0..alive.len())]).collect();
            let (old_noise, old_pos, old_hi, old_lo) = (noise.clone(), pos.clone(), hi.clone(), lo.clone());
            for (p, &src) in picks.iter().enumerate() {
                let len = dim * n;
                noise[p * len..p * len + dim * n].copy_from_slice(&old_noise[src * len..src * len + len]);
                pos[p * dim..(p + 1) * dim].copy_from_slice(&old_pos[src * dim..(src + 1) * dim]);
                hi[p * nd..(p + 1) * nd].copy_from_slice(&old_hi[src * nd..(src + 1) * nd]);
                lo[p * nd..(p + 1) * nd].copy_from_slice(&old_lo[src * nd..(src + 1) * nd]);
            }
        }
    }
    log_p
}

/// Fit of `log(−log P̂)` against `log x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub hurst: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    /// The exponent the small-ball law predicts, `−1/H`.
    pub expected: f64,
    pub points: Vec<SplittingEstimate>,
}

/// Splitting estimates on the radii `xs` and the decay-rate regression.
pub fn small_ball_decay_fit(
    hurst: f64,
    dim: usize,
    xs: &[f64],
    variant: &SmallBallVariant,
    opts: &SplittingOptions,
    seed: u64,
) -> Result<DecayFit> {
    if xs.len() < 2 {
        return Err(Error::Config("decay fit needs at least two radii".into()));
    }
    let predictor = Predictor::new(hurst, opts.steps);
    let points = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| splitting_with(&predictor, hurst, dim, x, variant, opts, rng::child_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = points.iter().find(|p| p.log_p >= 0.0) {
        return Err(Error::Domain(format!("radius {} is not small: P̂ = 1", p.x)));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| (-p.log_p).ln()).collect();
    let LineFit { slope, slope_stderr, .. } = stats::fit_line(&lx, &ly);
    Ok(DecayFit { hurst, slope, slope_stderr, expected: -1.0 / hurst, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_mc_monotone_and_saturates() {
        let spec = FbmSpec::uniform(0.5, 1.0, 128, 1).unwrap();
        let xs = [0.3, 0.6, 0.9, 6.0];
        let est =
            small_ball_mc(&spec, &xs, &SmallBallVariant::Fixed { phi: vec![1.0] }, 4000, 2, FbmMethod::Circulant).unwrap();
        for w in est.windows(2) {
            assert!(w[0].interval.estimate <= w[1].interval.estimate);
        }
        assert!(est[0].interval.estimate < 0.05);
        assert!(est[3].interval.estimate > 0.99);
        assert!(small_ball_mc(&spec, &[-1.0], &SmallBallVariant::Net { size: 1 }, 10, 0, FbmMethod::Circulant).is_err());
    }

    #[test]
    fn zero_successes_give_upper_bound_only() {
        let spec = FbmSpec::uniform(0.5, 1.0, 64, 1).unwrap();
        let est =
            small_ball_mc(&spec, &[0.01], &SmallBallVariant::Fixed { phi: vec![1.0] }, 200, 2, FbmMethod::Circulant).unwrap();
        assert!(est[0].estimate.is_none() && est[0].interval.upper > 0.0);
    }

    #[test]
    fn predictor_reproduces_autocovariance() {
        // innovation variances of fGn decrease, and equal 1 for H = 1/2
        let p = Predictor::new(0.75, 64);
        assert!(p.variances.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(p.coeffs[1][0] > 0.0);
        let q = Predictor::new(0.5, 16);
        assert!(q.variances.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn splitting_agrees_with_plain_mc() {
        // moderate radius where plain MC has enough hits
        let (h, x) = (0.5, 0.8);
        let opts = SplittingOptions { steps: 256, particles: 2000, stages: 16, replicates: 4 };
        let split = small_ball_splitting(h, 1, x, &SmallBallVariant::Fixed { phi: vec![1.0] }, &opts, 4).unwrap();
        let spec = FbmSpec::uniform(h, 1.0, 256, 1).unwrap();
        let mc =
            small_ball_mc(&spec, &[x], &SmallBallVariant::Fixed { phi: vec![1.0] }, 20_000, 4, FbmMethod::Circulant).unwrap();
        let p_mc = mc[0].interval.estimate;
        assert!((split.log_p - p_mc.ln()).abs() < 0.15, "{} vs {}", split.log_p, p_mc.ln());
    }
}
