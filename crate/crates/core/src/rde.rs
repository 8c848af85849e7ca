//! Step-`l` Euler scheme for `dY = V(Y) dX` driven by piecewise-linear paths,
//! and the classical flow map of smooth controls with forward sensitivities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{CompiledField, VectorFieldSystem};
use crate::gaussian::{FbmMethod, FbmSampler, FbmSpec, SampledPath};
use crate::rng;
use crate::signatures::default_mesh;
use crate::stats::{self, Estimate};
use crate::tensor::{flat_index, GradedTensor, Word};

const TAG_MOMENTS: u64 = 0x30;

/// `max(⌊1/H⌋, l̄)`.
pub fn default_level(hurst: f64, lbar: usize) -> usize {
    ((1.0 / hurst).floor() as usize).max(lbar).max(1)
}

/// The fields `V_(α)` for `|α| ≤ l`, compiled, with the position of `α` in
/// the driver signature. With a drift, time is prepended to the driver as
/// tensor letter 1.
#[derive(Clone, Debug)]
pub struct EulerTable {
    n: usize,
    driver_dim: usize,
    level: usize,
    drift: bool,
    terms: Vec<(usize, CompiledField)>,
}

impl EulerTable {
    pub fn new(system: &VectorFieldSystem, level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::Config("Euler level must be at least 1".into()));
        }
        let drift = system.drift().is_some();
        let driver_dim = system.d() + usize::from(drift);
        let mut terms = Vec::new();
        for len in 1..=level {
            for word in Word::all(driver_dim, len).filter(|w| w.len() == len) {
                let letters: Vec<usize> = word.0.iter().map(|&a| if drift { a - 1 } else { a }).collect();
                let field = system.euler_field(&letters)?;
                if !field.is_zero() {
                    terms.push((flat_index(driver_dim, &word), CompiledField::new(&field)));
                }
            }
        }
        Ok(EulerTable { n: system.n(), driver_dim, level, drift, terms })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    /// `y ← y + Σ V_(α)(y) g^α`.
    pub fn step(&self, y: &mut [f64], g: &GradedTensor, scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.extend_from_slice(y);
        let coeffs = g.as_slice();
        for (idx, field) in &self.terms {
            let c = coeffs[*idx];
            if c != 0.0 {
                field.add_eval(scratch, c, y);
            }
        }
    }

    fn increment(&self, path: &SampledPath, i: usize, parts: usize, out: &mut Vec<f64>) {
        out.clear();
        if self.drift {
            out.push((path.time(i + 1) - path.time(i)) / parts as f64);
        }
        let (a, b) = (path.point(i), path.point(i + 1));
        out.extend(a.iter().zip(b).map(|(x, y)| (y - x) / parts as f64));
    }

    /// Euler solution with one step per `stride` driver segments, each
    /// segment optionally split into `substeps` equal pieces.
    pub fn solve(&self, driver: &SampledPath, stride: usize, substeps: usize, y0: &[f64]) -> Result<SampledPath> {
        if driver.dim() + usize::from(self.drift) != self.driver_dim {
            return Err(Error::Dimension(format!("driver of dimension {} for {} fields", driver.dim(), self.driver_dim)));
        }
        if y0.len() != self.n {
            return Err(Error::Dimension(format!("initial point of length {} in R^{}", y0.len(), self.n)));
        }
        let segs = driver.len() - 1;
        if stride == 0 || substeps == 0 || segs % stride != 0 {
            return Err(Error::Config(format!("stride {stride} must divide the {segs} driver segments")));
        }
        let mut y = y0.to_vec();
        let mut times = vec![driver.time(0)];
        let mut values = y.clone();
        let mut g = GradedTensor::one(self.driver_dim, self.level);
        let (mut scratch, mut inc) = (Vec::new(), Vec::new());
        for k in (0..segs).step_by(stride) {
            if substeps == 1 {
                g.as_mut_slice().iter_mut().for_each(|c| *c = 0.0);
                g.as_mut_slice()[0] = 1.0;
                for i in k..k + stride {
                    self.increment(driver, i, 1, &mut inc);
                    g.mul_exp_vector(&inc);
                }
                self.step(&mut y, &g, &mut scratch);
            } else {
                for i in k..k + stride {
                    self.increment(driver, i, substeps, &mut inc);
                    let piece = GradedTensor::exp_vector(self.level, &inc);
                    for _ in 0..substeps {
                        self.step(&mut y, &piece, &mut scratch);
                    }
                }
            }
            times.push(driver.time(k + stride));
            values.extend_from_slice(&y);
        }
        SampledPath::new(times, self.n, values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub level: usize,
    /// Driver segments per Euler step.
    pub stride: usize,
    pub y0: Vec<f64>,
    /// Accept when halving the step moves the endpoint by less than
    /// `rtol · max(1, |Y_T|)`.
    pub rtol: f64,
    pub max_refinements: usize,
}

impl SolveConfig {
    pub fn new(level: usize, y0: Vec<f64>) -> Self {
        SolveConfig { level, stride: 1, y0, rtol: 1e-6, max_refinements: 10 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RdeSolution {
    #[serde(skip)]
    pub path: SampledPath,
    pub endpoint: Vec<f64>,
    pub refinements: usize,
    pub endpoint_change: f64,
    pub stride: usize,
    pub substeps: usize,
}

/// Euler solution refined by halving the step until the endpoint settles.
pub fn solve_rde(system: &VectorFieldSystem, driver: &SampledPath, config: &SolveConfig) -> Result<RdeSolution> {
    let table = EulerTable::new(system, config.level)?;
    let (mut stride, mut substeps) = (config.stride, 1);
    let mut current = table.solve(driver, stride, substeps, &config.y0)?;
    let endpoint = |p: &SampledPath| p.point(p.len() - 1).to_vec();
    for refinements in 1..=config.max_refinements {
        if stride > 1 && stride % 2 == 0 {
            stride /= 2;
        } else if stride > 1 {
            stride = 1;
        } else {
            substeps *= 2;
        }
        let finer = table.solve(driver, stride, substeps, &config.y0)?;
        let (a, b) = (endpoint(&current), endpoint(&finer));
        let change = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let size = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        if change <= config.rtol * size {
            return Ok(RdeSolution { endpoint: b, path: finer, refinements, endpoint_change: change, stride, substeps });
        }
        current = finer;
    }
    Err(Error::NonConvergence(format!("Euler scheme did not settle after {} refinements", config.max_refinements)))
}

/// End point of the controlled ODE and, optionally, its Jacobian with
/// respect to the control increments.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub end: Vec<f64>,
    /// `N × (m·d)`, column `k·d + i` for increment `i` of segment `k`.
    pub jacobian: Option<DMatrix<f64>>,
}

/// Compiled fields and their Jacobian columns for repeated flow solves.
#[derive(Clone, Debug)]
pub struct FlowMap {
    n: usize,
    d: usize,
    fields: Vec<CompiledField>,
    /// `jac[i][j]` is the vector `∂_j V_i`.
    jac: Vec<Vec<CompiledField>>,
    drift: Option<(CompiledField, Vec<CompiledField>)>,
    pub substeps: usize,
}

impl FlowMap {
    pub fn new(system: &VectorFieldSystem, substeps: usize) -> Self {
        let n = system.n();
        let compile_jac = |v: &crate::fields::PolyVectorField| -> Vec<CompiledField> {
            let j = v.jacobian();
            (0..n)
                .map(|col| {
                    let comps = (0..n).map(|row| j[row][col].clone()).collect();
                    CompiledField::new(&crate::fields::PolyVectorField::new(comps).expect("square"))
                })
                .collect()
        };
        FlowMap {
            n,
            d: system.d(),
            fields: system.fields().iter().map(CompiledField::new).collect(),
            jac: system.fields().iter().map(compile_jac).collect(),
            drift: system.drift().map(|v| (CompiledField::new(v), compile_jac(v))),
            substeps: substeps.max(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn controls(&self) -> usize {
        self.d
    }

    /// Derivative of the augmented state. `cols` sensitivity columns are
    /// active; `seg_cols` is the column range of the current segment.
    #[allow(clippy::too_many_arguments)]
    fn rhs(&self, z: &[f64], u: &[f64], m: f64, cols: usize, seg: usize, out: &mut [f64], tmp: &mut [f64]) {
        let n = self.n;
        let (y, s) = z.split_at(n);
        let (dy, ds) = out.split_at_mut(n);
        dy.iter_mut().for_each(|v| *v = 0.0);
        ds[..n * cols].iter_mut().for_each(|v| *v = 0.0);
        if let Some((f0, _)) = &self.drift {
            f0.add_eval(y, 1.0, dy);
        }
        for (i, f) in self.fields.iter().enumerate() {
            f.add_eval(y, u[i], dy);
        }
        if cols == 0 {
            return;
        }
        // A(y) S with A = Σ u_i J_i (+ J_0); S is row-major N × cols
        for j in 0..n {
            tmp[..n].iter_mut().for_each(|v| *v = 0.0);
            if let Some((_, j0)) = &self.drift {
                j0[j].add_eval(y, 1.0, &mut tmp[..n]);
            }
            for (i, cols_i) in self.jac.iter().enumerate() {
                if u[i] != 0.0 {
                    cols_i[j].add_eval(y, u[i], &mut tmp[..n]);
                }
            }
            // column j of A is tmp; ds[r, c] += A[r, j] * s[j, c]
            for r in 0..n {
                let a = tmp[r];
                if a == 0.0 {
                    continue;
                }
                let (dst, src) = (&mut ds[r * cols..(r + 1) * cols], &s[j * cols..(j + 1) * cols]);
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += a * v;
                }
            }
        }
        // B: ∂(Σ u_i V_i)/∂Δ_i = m V_i
        for (i, f) in self.fields.iter().enumerate() {
            tmp[..n].iter_mut().for_each(|v| *v = 0.0);
            f.add_eval(y, m, &mut tmp[..n]);
            for r in 0..n {
                ds[r * cols + seg + i] += tmp[r];
            }
        }
    }

    /// Solves `ẏ = V_0(y) + Σ_i V_i(y) ḣ^i` on `[0, 1]` for the
    /// piecewise-linear control with `m` equal segments whose increments are
    /// `increments[k·d..(k+1)·d]`, by RK4 with `substeps` steps per segment.
    pub fn solve(&self, x: &[f64], increments: &[f64], sensitivities: bool) -> Result<FlowResult> {
        let (n, d) = (self.n, self.d);
        if x.len() != n || increments.is_empty() || increments.len() % d != 0 {
            return Err(Error::Dimension(format!(
                "flow map needs x in R^{n} and a multiple of {d} increments, got {} and {}",
                x.len(),
                increments.len()
            )));
        }
        let m = increments.len() / d;
        let total = if sensitivities { m * d } else { 0 };
        let mut z = vec![0.0; n + n * total];
        z[..n].copy_from_slice(x);
        let h = 1.0 / (m * self.substeps) as f64;
        let len = z.len();
        let (mut k1, mut k2, mut k3, mut k4, mut zt) =
            (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut tmp = vec![0.0; n];
        let mf = m as f64;
        for seg in 0..m {
            let u: Vec<f64> = increments[seg * d..(seg + 1) * d].iter().map(|v| v * mf).collect();
            // only columns of started segments can be nonzero
            let active = if sensitivities { (seg + 1) * d } else { 0 };
            let width = n + n * active;
            // compact layout for the active block
            let mut za = compact(&z, n, total, active);
            for _ in 0..self.substeps {
                self.rhs(&za, &u, mf, active, seg * d, &mut k1[..width], &mut tmp);
                axpy_into(&za, h / 2.0, &k1[..width], &mut zt[..width]);
                self.rhs(&zt[..width], &u, mf, active, seg * d, &mut k2[..width], &mut tmp);
                axpy_into(&za, h / 2.0, &k2[..width], &mut zt[..width]);
                self.rhs(&zt[..width], &u, mf, active, seg * d, &mut k3[..width], &mut tmp);
                axpy_into(&za, h, &k3[..width], &mut zt[..width]);
                self.rhs(&zt[..width], &u, mf, active, seg * d, &mut k4[..width], &mut tmp);
                for i in 0..width {
                    za[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            expand(&za, n, active, total, &mut z);
        }
        let end = z[..n].to_vec();
        let jacobian = sensitivities.then(|| DMatrix::from_row_slice(n, total, &z[n..]));
        Ok(FlowResult { end, jacobian })
    }
}

fn axpy_into(z: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    for ((o, zi), ki) in out.iter_mut().zip(z).zip(k) {
        *o = zi + a * ki;
    }
}

/// Copies the first `active` columns of the `N × total` block.
fn compact(z: &[f64], n: usize, total: usize, active: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + n * active);
    out.extend_from_slice(&z[..n]);
    for r in 0..n {
        out.extend_from_slice(&z[n + r * total..n + r * total + active]);
    }
    out
}

fn expand(za: &[f64], n: usize, active: usize, total: usize, z: &mut [f64]) {
    z[..n].copy_from_slice(&za[..n]);
    for r in 0..n {
        z[n + r * total..n + r * total + active].copy_from_slice(&za[n + r * active..n + (r + 1) * active]);
    }
}

/// `Π_1(x, h)` and optionally `∂Π_1/∂(increments)`.
pub fn flow_map(
    system: &VectorFieldSystem,
    x: &[f64],
    increments: &[f64],
    substeps: usize,
    sensitivities: bool,
) -> Result<FlowResult> {
    FlowMap::new(system, substeps).solve(x, increments, sensitivities)
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentPoint {
    pub lag: f64,
    pub moment: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentFit {
    pub hurst: f64,
    pub p: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    /// `pH`, the exponent of the moment bound.
    pub expected: f64,
    pub points: Vec<MomentPoint>,
}

/// Regression of `log E[d(Y_s, Y_t)^p]` on `log |t − s|` for the solution
/// driven by fBM on `[0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn holder_moment_fit(
    system: &VectorFieldSystem,
    hurst: f64,
    p: f64,
    pairs: &[(f64, f64)],
    n_paths: usize,
    seed: u64,
    y0: &[f64],
    metric: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
) -> Result<MomentFit> {
    if pairs.len() < 2 || pairs.iter().any(|&(s, t)| !(0.0 <= s && s < t && t <= 1.0)) {
        return Err(Error::Config("need at least two time pairs 0 <= s < t <= 1".into()));
    }
    let mesh = default_mesh(hurst);
    let sampler = FbmSampler::new(FbmSpec::uniform(hurst, 1.0, mesh, system.d())?, FbmMethod::Circulant)?;
    let table = EulerTable::new(system, default_level(hurst, system.lbar()))?;
    let index = |t: f64| {
        let i = (t * mesh as f64).round();
        if (i / mesh as f64 - t).abs() > 1e-12 {
            Err(Error::OffGrid(t))
        } else {
            Ok(i as usize)
        }
    };
    let idx: Vec<(usize, usize)> = pairs.iter().map(|&(s, t)| Ok((index(s)?, index(t)?))).collect::<Result<_>>()?;
    let samples: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let driver = sampler.sample(&mut rng::stream(seed, TAG_MOMENTS, i));
            let y = table.solve(&driver, 1, 1, y0)?;
            Ok(idx.iter().map(|&(a, b)| metric(y.point(a), y.point(b)).powf(p)).collect())
        })
        .collect::<Result<_>>()?;
    let points: Vec<MomentPoint> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(s, t))| {
            let col: Vec<f64> = samples.iter().map(|r| r[k]).collect();
            MomentPoint { lag: t - s, moment: stats::mean_estimate(&col) }
        })
        .collect();
    let lx: Vec<f64> = points.iter().map(|q| q.lag.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|q| q.moment.value.ln()).collect();
    let fit = stats::fit_line(&lx, &ly);
    Ok(MomentFit { hurst, p, slope: fit.slope, slope_stderr: fit.slope_stderr, expected: p * hurst, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, Poly, PolyVectorField};
    use rand::{Rng, SeedableRng};

    fn smooth_driver(n: usize, f: impl Fn(f64) -> Vec<f64>) -> SampledPath {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let pts: Vec<Vec<f64>> = times.iter().map(|&t| f(t)).collect();
        SampledPath::from_points(times, &pts).unwrap()
    }

    #[test]
    fn additive_noise_is_exact() {
        let e = builtin("elliptic2").unwrap();
        let spec = FbmSpec::uniform(0.3, 1.0, 64, 2).unwrap();
        let x = FbmSampler::new(spec, FbmMethod::Circulant).unwrap().sample_indexed(1, 0);
        let y = EulerTable::new(&e, 3).unwrap().solve(&x, 4, 1, &[1.0, -1.0]).unwrap();
        for i in 0..y.len() {
            let xi = x.point(4 * i);
            assert!((y.point(i)[0] - 1.0 - xi[0]).abs() < 1e-14 && (y.point(i)[1] + 1.0 - xi[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_equation_matches_exponential() {
        let v = PolyVectorField::new(vec![Poly::variable(1, 0)]).unwrap();
        let sys = VectorFieldSystem::new("linear", vec![v], None, 1).unwrap();
        let h = smooth_driver(32, |t| vec![(3.0 * t).sin()]);
        let mut cfg = SolveConfig::new(2, vec![1.5]);
        cfg.rtol = 1e-9;
        let sol = solve_rde(&sys, &h, &cfg).unwrap();
        let exact = 1.5 * (3f64).sin().exp();
        assert!((sol.endpoint[0] - exact).abs() < 1e-6, "{} vs {exact}", sol.endpoint[0]);
    }

    #[test]
    fn heisenberg_area_matches_quadrature() {
        let sys = builtin("heisenberg").unwrap();
        let f = |t: f64| vec![(2.0 * t).sin(), t * t - 0.5 * t];
        let h = smooth_driver(4096, f);
        let sol = solve_rde(&sys, &h, &SolveConfig::new(2, vec![0.0; 3])).unwrap();
        // ∫ h1 dh2 = ∫ sin(2t)(2t − 1/2) dt
        let rule = stats::gauss_legendre(30);
        let exact = stats::integrate(|t| (2.0 * t).sin() * (2.0 * t - 0.5), 0.0, 1.0, &rule);
        assert!((sol.endpoint[2] - exact).abs() < 1e-6, "{} vs {exact}", sol.endpoint[2]);
    }

    #[test]
    fn scheme_order_and_young_regime() {
        let v = PolyVectorField::new(vec![Poly::variable(2, 1), Poly::variable(2, 0).scale(-1.0)]).unwrap();
        let w = PolyVectorField::new(vec![Poly::constant(2, 1.0), Poly::variable(2, 0).mul(&Poly::variable(2, 0))]).unwrap();
        let sys = VectorFieldSystem::new("rot", vec![v, w], None, 1).unwrap();
        let h = smooth_driver(256, |t| vec![(2.0 * t).cos() - 1.0, t * t]);
        let table = EulerTable::new(&sys, 1).unwrap();
        let reference = EulerTable::new(&sys, 3).unwrap().solve(&h, 1, 8, &[0.5, 0.5]).unwrap();
        let yref = reference.point(reference.len() - 1).to_vec();
        let err = |stride| {
            let y = table.solve(&h, stride, 1, &[0.5, 0.5]).unwrap();
            let e = y.point(y.len() - 1);
            ((e[0] - yref[0]).powi(2) + (e[1] - yref[1]).powi(2)).sqrt()
        };
        let errs: Vec<f64> = [32, 16, 8, 4].iter().map(|&s| err(s)).collect();
        let xs: Vec<f64> = [32.0f64, 16.0, 8.0, 4.0].iter().map(|s| (s / 256.0).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        assert!(stats::fit_line(&xs, &ys).slope >= 1.0 - 0.05, "{errs:?}");

        // fBM with H > 1/2: levels 1 and 2 agree after refinement
        let spec = FbmSpec::uniform(0.75, 1.0, 256, 2).unwrap();
        let x = FbmSampler::new(spec, FbmMethod::Circulant).unwrap().sample_indexed(4, 0);
        let mut c1 = SolveConfig::new(1, vec![0.5, 0.5]);
        c1.rtol = 1e-4;
        let mut c2 = c1.clone();
        c2.level = 2;
        let (a, b) = (solve_rde(&sys, &x, &c1).unwrap(), solve_rde(&sys, &x, &c2).unwrap());
        let diff = a.endpoint.iter().zip(&b.endpoint).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "{diff}");
    }

    #[test]
    fn flow_identity_and_zero_control() {
        let e = builtin("elliptic2").unwrap();
        let r = flow_map(&e, &[1.0, 2.0], &[0.1, 0.2, 0.3, -0.4], 2, true).unwrap();
        assert!((r.end[0] - 1.4).abs() < 1e-14 && (r.end[1] - 1.8).abs() < 1e-14);
        let j = r.jacobian.unwrap();
        let expect = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((j - expect).amax() < 1e-12);
        let h = builtin("heisenberg").unwrap();
        let r = flow_map(&h, &[0.3, 0.2, 0.1], &[0.0; 8], 4, false).unwrap();
        assert_eq!(r.end, vec![0.3, 0.2, 0.1]);
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for name in ["heisenberg", "engel"] {
            let sys = builtin(name).unwrap();
            let map = FlowMap::new(&sys, 4);
            let x: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let inc: Vec<f64> = (0..16).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let j = map.solve(&x, &inc, true).unwrap().jacobian.unwrap();
            let step = 1e-6;
            let mut worst: f64 = 0.0;
            for c in 0..inc.len() {
                let (mut a, mut b) = (inc.clone(), inc.clone());
                a[c] += step;
                b[c] -= step;
                let (fa, fb) = (map.solve(&x, &a, false).unwrap().end, map.solve(&x, &b, false).unwrap().end);
                for r in 0..sys.n() {
                    let fd = (fa[r] - fb[r]) / (2.0 * step);
                    worst = worst.max((fd - j[(r, c)]).abs() / fd.abs().max(1e-2));
                }
            }
            assert!(worst < 1e-4, "{name}: {worst}");
        }
    }

    #[test]
    fn flow_composes() {
        let sys = builtin("engel").unwrap();
        let map = FlowMap::new(&sys, 8);
        let inc = [0.3, -0.2, 0.1, 0.4, -0.5, 0.2, 0.1, 0.1];
        let x = [0.1, 0.0, -0.3, 0.2];
        let whole = map.solve(&x, &inc, false).unwrap().end;
        // first half then second half, each rescaled to unit time
        let mid = map.solve(&x, &inc[..4], false).unwrap().end;
        let end = map.solve(&mid, &inc[4..], false).unwrap().end;
        assert!(whole.iter().zip(&end).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn elliptic_moments_scale() {
        let e = builtin("elliptic2").unwrap();
        let pairs: Vec<(f64, f64)> = (1..=5).map(|k| (0.25, 0.25 + 0.5f64.powi(k))).collect();
        let euclid = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let fit = holder_moment_fit(&e, 0.75, 2.0, &pairs, 2000, 3, &[0.0, 0.0], &euclid).unwrap();
        assert!((fit.slope - 1.5).abs() < 0.1, "{fit:?}");
    }
}
