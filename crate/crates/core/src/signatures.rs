//! Truncated signatures and log-signatures of piecewise-linear paths.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{FbmMethod, FbmSampler, FbmSpec, SampledPath};
use crate::lie::{LieCoordinates, LyndonBasis};
use crate::rng;
use crate::stats;
use crate::tensor::GradedTensor;

const TAG_WINDOW: u64 = 0x516;
const TAG_UNIT: u64 = 0x517;

/// Signature of the piecewise-linear interpolation between grid indices
/// `i ≤ j`: the ordered product of `exp(ΔX)` over the segments.
pub fn signature_between(path: &SampledPath, l: usize, i: usize, j: usize) -> Result<GradedTensor> {
    if i > j || j >= path.len() {
        return Err(Error::Domain(format!("index range {i}..{j} outside a path of {} points", path.len())));
    }
    let mut sig = GradedTensor::one(path.dim(), l);
    for k in i..j {
        sig.mul_exp_vector(&path.increment(k, k + 1));
    }
    Ok(sig)
}

fn grid_index(path: &SampledPath, t: f64) -> Result<usize> {
    path.index_of(t).ok_or(Error::OffGrid(t))
}

/// Truncated signature over `[s, t]`; both must be grid times.
pub fn signature(path: &SampledPath, l: usize, s: f64, t: f64) -> Result<GradedTensor> {
    let (i, j) = (grid_index(path, s)?, grid_index(path, t)?);
    if i > j {
        return Err(Error::Domain(format!("need s <= t, got {s} > {t}")));
    }
    signature_between(path, l, i, j)
}

/// Log-signature coordinates with the least-squares residual of the
/// projection onto the Lie algebra.
#[derive(Clone, Debug)]
pub struct LogSignature {
    pub coords: LieCoordinates,
    pub residual: f64,
}

pub fn log_signature(path: &SampledPath, basis: &Arc<LyndonBasis>, s: f64, t: f64) -> Result<LogSignature> {
    let (i, j) = (grid_index(path, s)?, grid_index(path, t)?);
    if i > j {
        return Err(Error::Domain(format!("need s <= t, got {s} > {t}")));
    }
    log_signature_between(path, basis, i, j)
}

pub fn log_signature_between(path: &SampledPath, basis: &Arc<LyndonBasis>, i: usize, j: usize) -> Result<LogSignature> {
    if path.dim() != basis.dim() {
        return Err(Error::Dimension(format!("path dimension {} vs basis dimension {}", path.dim(), basis.dim())));
    }
    let log = signature_between(path, basis.depth(), i, j)?.log()?;
    let coords = basis.tensor_to_lie(&log)?;
    let (_, residual) = basis.project(&log)?;
    Ok(LogSignature { coords, residual })
}

/// A path together with its full signature.
#[derive(Clone, Debug)]
pub struct SignaturePath {
    pub path: SampledPath,
    pub level: usize,
    pub signature: GradedTensor,
}

impl SignaturePath {
    pub fn new(path: SampledPath, level: usize) -> Self {
        let signature = signature_between(&path, level, 0, path.len() - 1).expect("full range");
        SignaturePath { path, level, signature }
    }

    pub fn window(&self, s: f64, t: f64) -> Result<GradedTensor> {
        signature(&self.path, self.level, s, t)
    }
}

/// Grid points per unit time for lifting fBM.
pub fn default_mesh(hurst: f64) -> usize {
    if hurst >= 0.5 {
        1 << 10
    } else {
        1 << 12
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub coordinate: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub hurst: f64,
    pub level: usize,
    pub dim: usize,
    pub mesh: usize,
    pub n_paths: usize,
    pub rows: Vec<ScalingRow>,
    pub min_p_value: f64,
}

/// Compares the law of `U_{0,ε}` with that of `δ_{ε^H} U_{0,1}` for
/// two-dimensional fBM, per log-signature coordinate, by two-sample KS tests
/// on independent samples.
pub fn signature_scaling_check(hurst: f64, l: usize, eps_ladder: &[f64], n_paths: usize, seed: u64) -> Result<ScalingReport> {
    let dim = 2;
    let basis = LyndonBasis::new(dim, l)?;
    let mesh = default_mesh(hurst);
    let unit = FbmSampler::new(FbmSpec::uniform(hurst, 1.0, mesh, dim)?, FbmMethod::Circulant)?;
    let collect = |sampler: &FbmSampler, tag: u64| -> Result<Vec<Vec<f64>>> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let p = sampler.sample(&mut rng::stream(seed, tag, i));
                log_signature_between(&p, &basis, 0, p.len() - 1).map(|u| u.coords.coeffs().to_vec())
            })
            .collect()
    };
    let unit_coords = collect(&unit, TAG_UNIT)?;
    let mut rows = Vec::new();
    for (e, &eps) in eps_ladder.iter().enumerate() {
        let steps = (eps * mesh as f64).round() as usize;
        if !(eps > 0.0 && eps <= 1.0) || steps == 0 {
            return Err(Error::Domain(format!("window {eps} must be in (0, 1] and span a grid step")));
        }
        let window = FbmSampler::new(FbmSpec::uniform(hurst, eps, steps, dim)?, FbmMethod::Circulant)?;
        let window_coords = collect(&window, TAG_WINDOW + ((e as u64) << 8))?;
        let lambda = eps.powf(hurst);
        for (k, el) in basis.elements().iter().enumerate() {
            let scale = lambda.powi(el.degree as i32);
            let a: Vec<f64> = window_coords.iter().map(|c| c[k]).collect();
            let b: Vec<f64> = unit_coords.iter().map(|c| c[k] * scale).collect();
            let ks = stats::ks_two_sample(&a, &b);
            rows.push(ScalingRow { eps, coordinate: el.bracket.to_string(), statistic: ks.statistic, p_value: ks.p_value });
        }
    }
    let min_p_value = rows.iter().map(|r| r.p_value).fold(1.0, f64::min);
    Ok(ScalingReport { hurst, level: l, dim, mesh, n_paths, rows, min_p_value })
}
