use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{covariance_rh, FbmSpec, SampledPath};
use crate::error::{Error, Result};
use crate::rng::{self, PathRng};

/// Largest grid the dense Cholesky sampler accepts.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

const TAG_FBM: u64 = 0xFB;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FbmMethod {
    /// Exact Cholesky factorization of the covariance on the grid.
    Cholesky,
    /// Davies–Harte circulant embedding of fractional Gaussian noise.
    Circulant,
}

enum Engine {
    Cholesky(DMatrix<f64>),
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>>, scale: f64 },
}

/// A prepared sampler: the factorization is computed once and paths are
/// drawn from caller-provided generators.
pub struct FbmSampler {
    spec: FbmSpec,
    engine: Engine,
}

impl FbmSampler {
    pub fn new(spec: FbmSpec, method: FbmMethod) -> Result<Self> {
        spec.validate()?;
        let engine = match method {
            FbmMethod::Cholesky => Engine::Cholesky(cholesky_factor(&spec)?),
            FbmMethod::Circulant => circulant_engine(&spec)?,
        };
        Ok(FbmSampler { spec, engine })
    }

    pub fn spec(&self) -> &FbmSpec {
        &self.spec
    }

    /// Draw one `d`-dimensional path.
    pub fn sample(&self, rng: &mut PathRng) -> SampledPath {
        let n = self.spec.grid.len();
        let d = self.spec.dim;
        let mut values = vec![0.0; n * d];
        match &self.engine {
            Engine::Cholesky(l) => {
                let m = n - 1;
                let mut z = vec![0.0; m];
                for k in 0..d {
                    z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                    for i in 0..m {
                        let row = l.row(i);
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += row[j] * z[j];
                        }
                        values[(i + 1) * d + k] = acc;
                    }
                }
            }
            Engine::Circulant { sqrt_eig, fft, scale } => {
                let size = sqrt_eig.len();
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                for pair in (0..d).step_by(2) {
                    for (b, s) in buf.iter_mut().zip(sqrt_eig) {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        *b = Complex64::new(re * s, im * s);
                    }
                    fft.process(&mut buf);
                    for (k, part) in [(pair, 0), (pair + 1, 1)] {
                        if k >= d {
                            break;
                        }
                        let mut acc = 0.0;
                        for i in 0..n - 1 {
                            acc += if part == 0 { buf[i].re } else { buf[i].im } * scale;
                            values[(i + 1) * d + k] = acc;
                        }
                    }
                }
            }
        }
        SampledPath::new(self.spec.grid.clone(), d, values).expect("consistent shape")
    }

    /// Path number `index` of the stream rooted at `seed`.
    pub fn sample_indexed(&self, seed: u64, index: u64) -> SampledPath {
        self.sample(&mut rng::stream(seed, TAG_FBM, index))
    }
}

/// `n_paths` independent paths; path `i` depends only on `(seed, i)`.
pub fn sample_fbm(spec: &FbmSpec, n_paths: usize, seed: u64, method: FbmMethod) -> Result<Vec<SampledPath>> {
    let sampler = FbmSampler::new(spec.clone(), method)?;
    Ok((0..n_paths as u64).into_par_iter().map(|i| sampler.sample_indexed(seed, i)).collect())
}

fn cholesky_factor(spec: &FbmSpec) -> Result<DMatrix<f64>> {
    let times = &spec.grid[1..];
    let m = times.len();
    if m + 1 > CHOLESKY_MAX_POINTS {
        return Err(Error::Domain(format!(
            "Cholesky sampler limited to {CHOLESKY_MAX_POINTS} grid points, got {}; use the circulant method",
            m + 1
        )));
    }
    let cov = DMatrix::from_fn(m, m, |i, j| covariance_rh(spec.hurst, times[i], times[j]));
    cholesky_with_jitter(cov).map(|c| c.l())
}

/// Cholesky with diagonal jitter escalating from 1e-14 to 1e-8 of the largest
/// diagonal entry.
pub(crate) fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok(c);
    }
    let diag = cov.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-14;
    while jitter <= 1e-8 {
        let mut a = cov.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter * diag;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite(format!("covariance of size {} after jitter 1e-8", cov.nrows())))
}

fn circulant_engine(spec: &FbmSpec) -> Result<Engine> {
    if !spec.is_uniform() {
        return Err(Error::Domain("circulant sampler needs a uniform grid".into()));
    }
    let n = spec.steps();
    let h = spec.hurst;
    let gamma = |k: usize| {
        let k = k as f64;
        0.5 * ((k + 1.0).powf(2.0 * h) - 2.0 * k.powf(2.0 * h) + (k - 1.0).abs().powf(2.0 * h))
    };
    let size = 2 * n;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| {
            let lag = if j <= n { j } else { size - j };
            Complex64::new(gamma(lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let tol = 1e-10 * row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let mut sqrt_eig = Vec::with_capacity(size);
    for c in &row {
        if c.re < -tol {
            return Err(Error::NotPositiveDefinite(format!("circulant eigenvalue {:.3e}", c.re)));
        }
        sqrt_eig.push((c.re.max(0.0) / size as f64).sqrt());
    }
    let scale = (spec.horizon() / n as f64).powf(h);
    Ok(Engine::Circulant { sqrt_eig, fft, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn empirical_cov(paths: &[SampledPath], i: usize, j: usize, k: usize) -> f64 {
        let a: Vec<f64> = paths.iter().map(|p| p.point(i)[k]).collect();
        let b: Vec<f64> = paths.iter().map(|p| p.point(j)[k]).collect();
        stats::covariance(&a, &b)
    }

    #[test]
    fn both_methods_match_covariance() {
        for &h in &[0.25, 0.5, 0.75] {
            let spec = FbmSpec::uniform(h, 2.0, 16, 3).unwrap();
            for method in [FbmMethod::Cholesky, FbmMethod::Circulant] {
                let paths = sample_fbm(&spec, 20_000, 11, method).unwrap();
                for &(i, j) in &[(16, 16), (8, 16), (3, 12), (1, 1)] {
                    let exact = covariance_rh(h, spec.grid[i], spec.grid[j]);
                    for k in 0..3 {
                        let est = empirical_cov(&paths, i, j, k);
                        assert!((est - exact).abs() < 0.05 * exact.abs().max(0.05), "{h} {method:?} {i} {j} {est} {exact}");
                    }
                }
                assert!(paths.iter().all(|p| p.point(0).iter().all(|&x| x == 0.0)));
            }
        }
    }

    #[test]
    fn components_independent() {
        let spec = FbmSpec::uniform(0.7, 1.0, 8, 2).unwrap();
        let paths = sample_fbm(&spec, 20_000, 5, FbmMethod::Circulant).unwrap();
        let a: Vec<f64> = paths.iter().map(|p| p.point(8)[0]).collect();
        let b: Vec<f64> = paths.iter().map(|p| p.point(8)[1]).collect();
        assert!(stats::correlation(&a, &b).abs() < 0.03);
    }

    #[test]
    fn nonuniform_cholesky_and_limits() {
        let spec = FbmSpec::new(0.6, vec![0.0, 0.1, 0.15, 0.9, 1.0], 1).unwrap();
        assert!(FbmSampler::new(spec.clone(), FbmMethod::Circulant).is_err());
        let s = FbmSampler::new(spec, FbmMethod::Cholesky).unwrap();
        assert_eq!(s.sample_indexed(1, 0), s.sample_indexed(1, 0));
        assert_ne!(s.sample_indexed(1, 0), s.sample_indexed(1, 1));
        let big = FbmSpec::uniform(0.5, 1.0, CHOLESKY_MAX_POINTS, 1).unwrap();
        assert!(FbmSampler::new(big, FbmMethod::Cholesky).is_err());
    }

    #[test]
    fn scaling_to_horizon() {
        let h = 0.3;
        let spec = FbmSpec::uniform(h, 5.0, 32, 1).unwrap();
        let paths = sample_fbm(&spec, 20_000, 3, FbmMethod::Circulant).unwrap();
        let v = empirical_cov(&paths, 32, 32, 0);
        assert!((v / 5f64.powf(2.0 * h) - 1.0).abs() < 0.05);
    }
}
