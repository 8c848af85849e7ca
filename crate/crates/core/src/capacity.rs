//! Newtonian kernels, energies and capacities of point clouds, minimized
//! over the weight simplex.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::MetricHandle;
use crate::error::{Error, Result};
use crate::rng;

const TAG_SET: u64 = 0xC5;

/// `r^{-α}` for `α > 0`, `log(N₀/r)` for `α = 0`, `1` for `α < 0`.
pub fn kernel_k(alpha: f64, r: f64, n0: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("kernel needs r > 0, got {r}")));
    }
    Ok(if alpha > 0.0 {
        r.powf(-alpha)
    } else if alpha == 0.0 {
        (n0 / r).ln()
    } else {
        1.0
    })
}

/// Probability measure with finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl PointMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Dimension("need one weight per point and at least one point".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("weights must be nonnegative and sum to 1".into()));
        }
        Ok(PointMeasure { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Clone, Debug)]
pub struct CapacityConfig {
    pub alpha: f64,
    /// Log-kernel scale; `e·diameter` of the cloud when unset.
    pub n0: Option<f64>,
    /// Diagonal regularization radius; mean nearest-neighbour spacing when unset.
    pub h_reg: Option<f64>,
    pub metric: MetricHandle,
    /// Drop the `i = j` terms entirely.
    pub ignore_diagonal: bool,
    pub iters: usize,
    /// Stop once the Frank–Wolfe gap falls below `gap_tol · E`.
    pub gap_tol: f64,
}

impl CapacityConfig {
    pub fn new(alpha: f64, metric: MetricHandle) -> Self {
        CapacityConfig { alpha, n0: None, h_reg: None, metric, ignore_diagonal: false, iters: 10_000, gap_tol: 1e-8 }
    }
}

/// Pairwise distances under the metric handle (rows in parallel).
pub fn distance_matrix(points: &[Vec<f64>], metric: &MetricHandle) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| metric.distance(&points[i], &points[j])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (k, v) in upper[i].iter().enumerate() {
            d[i][i + 1 + k] = *v;
            d[i + 1 + k][i] = *v;
        }
    }
    Ok(d)
}

fn mean_nearest_neighbour(d: &[Vec<f64>]) -> f64 {
    let n = d.len();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| d[i][j]).fold(f64::INFINITY, f64::min))
        .sum();
    total / n as f64
}

struct KernelMatrix {
    k: Vec<Vec<f64>>,
    n0: f64,
    h_reg: f64,
    min_spacing: f64,
}

fn kernel_matrix(d: &[Vec<f64>], config: &CapacityConfig) -> Result<KernelMatrix> {
    let n = d.len();
    let diameter = d.iter().flatten().copied().fold(0.0, f64::max);
    let n0 = config.n0.unwrap_or(std::f64::consts::E * diameter.max(f64::MIN_POSITIVE));
    if !(n0 > 0.0) {
        return Err(Error::Config("N0 must be positive".into()));
    }
    let h_reg = config.h_reg.unwrap_or_else(|| mean_nearest_neighbour(d));
    if !config.ignore_diagonal && !(h_reg > 0.0) {
        return Err(Error::Config("h_reg must be positive".into()));
    }
    let mut min_spacing = f64::INFINITY;
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                k[i][i] = if config.ignore_diagonal { 0.0 } else { kernel_k(config.alpha, h_reg, n0)? };
                continue;
            }
            let r = d[i][j];
            min_spacing = min_spacing.min(r);
            if r == 0.0 && config.alpha >= 0.0 {
                return Err(Error::Domain("coincident support points give infinite energy".into()));
            }
            k[i][j] = if r == 0.0 { 1.0 } else { kernel_k(config.alpha, r, n0)? };
        }
    }
    Ok(KernelMatrix { k, n0, h_reg, min_spacing })
}

/// `Σ_{i≠j} wᵢwⱼ K(d(xᵢ,xⱼ)) + Σ wᵢ² K(h_reg)`.
pub fn energy(mu: &PointMeasure, config: &CapacityConfig) -> Result<f64> {
    let d = distance_matrix(&mu.points, &config.metric)?;
    let km = kernel_matrix(&d, config)?;
    Ok(quadratic(&km.k, &mu.weights))
}

fn quadratic(k: &[Vec<f64>], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(row, wi)| wi * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    pub energy: f64,
    pub weights: Vec<f64>,
    pub n: usize,
    pub n0: f64,
    pub h_reg: f64,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
    /// `h_reg` exceeds the smallest pairwise distance.
    pub h_reg_coarse: bool,
}

/// Reciprocal of the minimal energy over probability weights on `cloud`,
/// by away-step Frank–Wolfe with exact line search.
pub fn capacity(cloud: &[Vec<f64>], config: &CapacityConfig) -> Result<CapacityResult> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::Domain("capacity of an empty cloud".into()));
    }
    let uniform = vec![1.0 / n as f64; n];
    if config.alpha < 0.0 && !config.ignore_diagonal {
        return Ok(CapacityResult {
            value: 1.0,
            energy: 1.0,
            weights: uniform,
            n,
            n0: config.n0.unwrap_or(f64::NAN),
            h_reg: config.h_reg.unwrap_or(f64::NAN),
            iterations: 0,
            gap: 0.0,
            converged: true,
            h_reg_coarse: false,
        });
    }
    if n == 1 {
        // an atom has infinite energy for α ≥ 0; the regularized value
        // vanishes as h_reg → 0
        return Ok(CapacityResult {
            value: 0.0,
            energy: f64::INFINITY,
            weights: vec![1.0],
            n,
            n0: config.n0.unwrap_or(f64::NAN),
            h_reg: config.h_reg.unwrap_or(0.0),
            iterations: 0,
            gap: 0.0,
            converged: true,
            h_reg_coarse: false,
        });
    }
    let d = distance_matrix(cloud, &config.metric)?;
    let km = kernel_matrix(&d, config)?;
    let k = &km.k;

    let mut w = uniform;
    let mut kw: Vec<f64> = k.iter().map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
    let mut e = w.iter().zip(&kw).map(|(a, b)| a * b).sum::<f64>();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..config.iters {
        iterations = it;
        // gradient is 2·Kw; work with Kw
        let s = (0..n).min_by(|&a, &b| kw[a].total_cmp(&kw[b])).expect("nonempty");
        let v = (0..n).filter(|&i| w[i] > 0.0).max_by(|&a, &b| kw[a].total_cmp(&kw[b])).expect("support");
        gap = 2.0 * (e - kw[s]);
        if gap <= config.gap_tol * e.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let away_gain = 2.0 * (kw[v] - e);
        let (toward, gmax, slope, curvature) = if gap >= away_gain {
            // d = e_s − w
            (true, 1.0, 2.0 * (kw[s] - e), k[s][s] - 2.0 * kw[s] + e)
        } else {
            // d = w − e_v
            let wv = w[v];
            (false, if wv < 1.0 { wv / (1.0 - wv) } else { f64::INFINITY }, 2.0 * (e - kw[v]), e - 2.0 * kw[v] + k[v][v])
        };
        let mut gamma = if curvature > 0.0 { -slope / (2.0 * curvature) } else { gmax };
        gamma = gamma.clamp(0.0, gmax);
        if gamma == 0.0 {
            converged = true;
            break;
        }
        if toward {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= 1.0 - gamma;
                if i == s {
                    *wi += gamma;
                }
            }
            for i in 0..n {
                kw[i] = (1.0 - gamma) * kw[i] + gamma * k[i][s];
            }
        } else {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= 1.0 + gamma;
                if i == v {
                    *wi -= gamma;
                }
            }
            if gamma == gmax {
                w[v] = 0.0;
            }
            for i in 0..n {
                kw[i] = (1.0 + gamma) * kw[i] - gamma * k[i][v];
            }
        }
        e = e + gamma * slope + gamma * gamma * curvature;
    }
    // recompute from the weights to shed accumulated drift
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let energy = quadratic(k, &w);
    Ok(CapacityResult {
        value: 1.0 / energy,
        energy,
        weights: w,
        n,
        n0: km.n0,
        h_reg: km.h_reg,
        iterations,
        gap,
        converged,
        h_reg_coarse: km.h_reg > km.min_spacing,
    })
}

/// Compact sets that can be sampled and tested for membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TargetSet {
    /// Metric ball `B_d(center, radius)`.
    Ball { center: Vec<f64>, radius: f64 },
    Segment { from: Vec<f64>, to: Vec<f64> },
    /// Coordinate box `Π [lo_i, hi_i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad coordinate '{t}'"))))
        .collect()
}

impl TargetSet {
    /// Parses `ball:x1,..,xn:r`, `segment:a1,..:b1,..` or `box:lo1,..:hi1,..`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let set = match parts.as_slice() {
            ["ball", c, r] => TargetSet::Ball {
                center: parse_point(c)?,
                radius: r.parse().map_err(|_| Error::Config(format!("bad radius '{r}'")))?,
            },
            ["segment", a, b] => TargetSet::Segment { from: parse_point(a)?, to: parse_point(b)? },
            ["box", a, b] => TargetSet::Box { lo: parse_point(a)?, hi: parse_point(b)? },
            _ => return Err(Error::Config(format!("cannot parse set '{s}'"))),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSet::Ball { radius, .. } if !(*radius > 0.0) => Err(Error::Config("ball radius must be positive".into())),
            TargetSet::Segment { from, to } if from.len() != to.len() => Err(Error::Dimension("segment ends".into())),
            TargetSet::Box { lo, hi } if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| a > b) => {
                Err(Error::Config("box needs lo ≤ hi componentwise".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Ball { center, .. } => center.len(),
            TargetSet::Segment { from, .. } => from.len(),
            TargetSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, metric: &MetricHandle, y: &[f64]) -> Result<bool> {
        Ok(match self {
            TargetSet::Ball { center, radius } => metric.distance(center, y)? <= *radius,
            TargetSet::Box { lo, hi } => y.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b),
            TargetSet::Segment { .. } => false,
        })
    }

    /// `n` points drawn uniformly (balls by rejection from a bounding box).
    pub fn sample(&self, metric: &MetricHandle, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        match self {
            TargetSet::Segment { from, to } => {
                for i in 0..n as u64 {
                    let t: f64 = rng::stream(seed, TAG_SET, i).gen();
                    out.push(from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect());
                }
            }
            TargetSet::Box { lo, hi } => {
                for i in 0..n as u64 {
                    let mut g = rng::stream(seed, TAG_SET, i);
                    out.push(lo.iter().zip(hi).map(|(a, b)| a + (b - a) * g.gen::<f64>()).collect());
                }
            }
            TargetSet::Ball { center, radius } => {
                let (lo, hi) = metric.bounding_box(center, *radius)?;
                let mut i = 0u64;
                while out.len() < n {
                    let mut g = rng::stream(seed, TAG_SET, i);
                    let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * g.gen::<f64>()).collect();
                    if metric.distance(center, &y)? <= *radius {
                        out.push(y);
                    }
                    i += 1;
                    if i > 1000 * (n as u64 + 10) {
                        return Err(Error::NonConvergence("ball rejection sampler starved".into()));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetCapacity {
    pub capacity: f64,
    pub energy: f64,
    pub n: usize,
    pub h_reg: f64,
    /// Value from the first `n/2` sample points.
    pub capacity_half: f64,
    /// Value with `h_reg` halved.
    pub capacity_h_half: f64,
    /// Largest relative change across the two checks is below 10%.
    pub stable: bool,
    pub converged: bool,
}

/// Capacity of a sampled set, reported at two resolutions.
pub fn capacity_of_set(target: &TargetSet, config: &CapacityConfig, n_points: usize, seed: u64) -> Result<SetCapacity> {
    if n_points < 2 {
        return Err(Error::Config("need at least two sample points".into()));
    }
    let cloud = target.sample(&config.metric, n_points, seed)?;
    let full = capacity(&cloud, config)?;
    let half = capacity(&cloud[..n_points / 2], config)?;
    let mut finer = config.clone();
    finer.h_reg = Some(full.h_reg / 2.0);
    finer.n0 = Some(full.n0);
    let h_half = if config.alpha < 0.0 { full.clone() } else { capacity(&cloud, &finer)? };
    let rel = |a: f64| if full.value == 0.0 { 0.0 } else { (a / full.value - 1.0).abs() };
    Ok(SetCapacity {
        capacity: full.value,
        energy: full.energy,
        n: n_points,
        h_reg: full.h_reg,
        capacity_half: half.value,
        capacity_h_half: h_half.value,
        stable: rel(half.value) < 0.1 && rel(h_half.value) < 0.1,
        converged: full.converged,
    })
}
