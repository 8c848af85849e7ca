use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{increment_covariance, FbmSpec, SampledPath};
use crate::error::{Error, Result};
use crate::rng::{self, PathRng};
use crate::stats::{self, gauss_legendre, integrate};

const TAG_MVN: u64 = 0x4D56;

/// Largest past horizon the automatic truncation will choose.
const MAX_PAST: f64 = 1e15;

/// Standard closed form of the Mandelbrot–van Ness constant.
pub fn c_h_closed_form(hurst: f64) -> f64 {
    (2.0 * hurst * gamma(1.5 - hurst) / (gamma(hurst + 0.5) * gamma(2.0 - 2.0 * hurst))).sqrt()
}

/// `c_H` obtained by requiring `∫ k_H(1,u)² du = R_H(1,1) = 1`, with the
/// integral computed by quadrature.
pub fn c_h_calibrated(hurst: f64) -> f64 {
    let a = hurst - 0.5;
    if a == 0.0 {
        return 1.0;
    }
    // ∫_0^∞ ((1+v)^a − v^a)² dv, split at 1 and at a far cut-off with an analytic tail
    let g = |v: f64| {
        let d = v.powf(a) * (a * (1.0 / v).ln_1p()).exp_m1();
        d * d
    };
    let rule = gauss_legendre(20);
    let mut near = 0.0;
    let mut hi = 1.0f64;
    for _ in 0..60 {
        near += integrate(g, hi / 2.0, hi, &rule);
        hi /= 2.0;
    }
    // on [0, δ] expand the square and keep the leading terms
    near += hi.powf(2.0 * a + 1.0) / (2.0 * a + 1.0) - 2.0 * hi.powf(a + 1.0) / (a + 1.0) + hi;
    let cut = 1e8f64;
    let mut far = 0.0;
    let ln_cut = cut.ln();
    let panels = 40;
    for p in 0..panels {
        let (y0, y1) = (ln_cut * p as f64 / panels as f64, ln_cut * (p + 1) as f64 / panels as f64);
        far += integrate(|y| g(y.exp()) * y.exp(), y0, y1, &rule);
    }
    let tail = a * a * cut.powf(2.0 * a - 1.0) / (1.0 - 2.0 * a) * (1.0 + (a - 1.0) / cut);
    (1.0 / (1.0 / (2.0 * hurst) + near + far + tail)).sqrt()
}

/// `(u − r)^a − (s − r)^a` for `r < s < u`, written as a function of the lag
/// `λ = s − r` without cancellation.
fn past_kernel(a: f64, lag: f64, ahead: f64) -> f64 {
    lag.powf(a) * (a * (ahead / lag).ln_1p()).exp_m1()
}

/// Past and future parts of an fBM increment over a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedIncrement {
    pub s: f64,
    pub eps: f64,
    /// `L_{s,u}`: the part driven by the noise inside the window.
    pub l_part: SampledPath,
    /// `Q_{s,u}`: the part driven by the noise before `s`.
    pub q_part: SampledPath,
}

impl DecomposedIncrement {
    /// `B_{s,u} = L_{s,u} + Q_{s,u}` on the output grid.
    pub fn increment(&self) -> SampledPath {
        let values = self.l_part.values().iter().zip(self.q_part.values()).map(|(a, b)| a + b).collect();
        SampledPath::new(self.l_part.times().to_vec(), self.l_part.dim(), values).expect("same shape")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvnOptions {
    /// Output points inside the window (excluding `s`).
    pub output_steps: usize,
    /// White-noise cells per output step.
    pub cells_per_step: usize,
    /// Past horizon `T0`; `None` picks the smallest one meeting `tail_tol`.
    pub truncation: Option<f64>,
    /// Bound on the neglected variance of `Q_{s,s+ε}`.
    pub tail_tol: f64,
}

impl Default for MvnOptions {
    fn default() -> Self {
        MvnOptions { output_steps: 64, cells_per_step: 4, truncation: None, tail_tol: 1e-6 }
    }
}

/// Precomputed cell-averaged Volterra weights for one `(H, s, ε)`.
#[derive(Clone, Debug)]
pub struct MvnDecomposer {
    hurst: f64,
    dim: usize,
    s: f64,
    eps: f64,
    c_h: f64,
    truncation: f64,
    tail_estimate: f64,
    times: Vec<f64>,
    cell: f64,
    /// Per output row, weights on window cells `0..k·cells_per_step`.
    l_weights: Vec<Vec<f64>>,
    /// Past cell widths (nearest first) and per-row weights.
    past_widths: Vec<f64>,
    q_weights: Vec<Vec<f64>>,
}

impl MvnDecomposer {
    pub fn new(hurst: f64, dim: usize, s: f64, eps: f64, opts: &MvnOptions) -> Result<Self> {
        FbmSpec::new(hurst, vec![0.0, 1.0], dim)?;
        if !(s >= 0.0) || !(eps > 0.0) || opts.output_steps == 0 || opts.cells_per_step == 0 {
            return Err(Error::Domain("decomposition needs s >= 0, eps > 0 and a nonempty grid".into()));
        }
        let a = hurst - 0.5;
        let c_h = c_h_calibrated(hurst);
        let tail_at = |lag: f64| {
            if a == 0.0 {
                0.0
            } else {
                c_h * c_h * a * a * eps * eps * lag.powf(2.0 * a - 1.0) / (1.0 - 2.0 * a)
            }
        };
        let truncation = match opts.truncation {
            Some(t0) if t0 > 0.0 => t0,
            Some(t0) => return Err(Error::Domain(format!("truncation T0 = {t0} must be positive"))),
            None => {
                let lag = if a == 0.0 {
                    0.0
                } else {
                    (c_h * c_h * a * a * eps * eps / ((1.0 - 2.0 * a) * opts.tail_tol)).powf(1.0 / (1.0 - 2.0 * a))
                };
                (1.01 * lag.min(MAX_PAST) - s).max(8.0 * eps)
            }
        };
        let max_lag = s + truncation;
        let tail_estimate = tail_at(max_lag);
        if tail_estimate > opts.tail_tol {
            return Err(Error::Truncation { estimate: tail_estimate });
        }

        let steps = opts.output_steps;
        let cells = steps * opts.cells_per_step;
        let cell = eps / cells as f64;
        let times: Vec<f64> = (0..=steps).map(|k| s + eps * k as f64 / steps as f64).collect();

        // Window: average of (u − r)^a over each cell, exact antiderivative.
        let l_weights = (0..=steps)
            .map(|k| {
                let end = k * opts.cells_per_step;
                (0..end)
                    .map(|j| {
                        let far = (end - j) as f64 * cell;
                        let near = (end - j - 1) as f64 * cell;
                        (far.powf(a + 1.0) - near.powf(a + 1.0)) / ((a + 1.0) * cell)
                    })
                    .collect()
            })
            .collect();

        // Past lags: uniform cells out to 4ε, then geometric growth.
        let mut bounds = vec![0.0];
        while *bounds.last().unwrap() < max_lag {
            let last = *bounds.last().unwrap();
            let next = if last < 4.0 * eps { last + cell } else { last * 1.05 };
            bounds.push(next.min(max_lag));
        }
        let past_widths: Vec<f64> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        let rule = gauss_legendre(4);
        let q_weights = times
            .iter()
            .map(|&u| {
                let ahead = u - s;
                if ahead == 0.0 || a == 0.0 {
                    return vec![0.0; past_widths.len()];
                }
                bounds
                    .windows(2)
                    .map(|w| {
                        let (lo, hi) = (w[0], w[1]);
                        if lo < 4.0 * eps {
                            // exact: ∫ (λ+ahead)^a − λ^a dλ over the cell, averaged
                            let anti = |l: f64| ((l + ahead).powf(a + 1.0) - l.powf(a + 1.0)) / (a + 1.0);
                            (anti(hi) - anti(lo)) / (hi - lo)
                        } else {
                            integrate(|l| past_kernel(a, l, ahead), lo, hi, &rule) / (hi - lo)
                        }
                    })
                    .collect()
            })
            .collect();

        Ok(MvnDecomposer {
            hurst,
            dim,
            s,
            eps,
            c_h,
            truncation,
            tail_estimate,
            times,
            cell,
            l_weights,
            past_widths,
            q_weights,
        })
    }

    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Covariance of `B_{s,u_i}` and `B_{s,u_j}` implied by the weights.
    pub fn increment_covariance(&self, i: usize, j: usize) -> f64 {
        let l: f64 = self.l_weights[i].iter().zip(&self.l_weights[j]).map(|(x, y)| x * y).sum::<f64>() * self.cell;
        let q: f64 = self.q_weights[i]
            .iter()
            .zip(&self.q_weights[j])
            .zip(&self.past_widths)
            .map(|((x, y), w)| x * y * w)
            .sum();
        self.c_h * self.c_h * (l + q)
    }

    /// Relative RMS (Frobenius) error of the implied increment covariance
    /// against the closed form on the output grid.
    pub fn covariance_rms_error(&self) -> f64 {
        let n = self.times.len();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 1..n {
            for j in 1..n {
                let exact = increment_covariance(self.hurst, (self.s, self.times[i]), (self.s, self.times[j]));
                num += (self.increment_covariance(i, j) - exact).powi(2);
                den += exact * exact;
            }
        }
        (num / den).sqrt()
    }

    pub fn sample(&self, rng: &mut PathRng) -> DecomposedIncrement {
        let rows = self.times.len();
        let d = self.dim;
        let mut l_vals = vec![0.0; rows * d];
        let mut q_vals = vec![0.0; rows * d];
        let window_cells = self.l_weights[rows - 1].len();
        let mut dw = vec![0.0; window_cells];
        let mut dp = vec![0.0; self.past_widths.len()];
        let sqrt_cell = self.cell.sqrt();
        for k in 0..d {
            // window cells are indexed forward in time, weights by distance to u
            dw.iter_mut().for_each(|x| *x = rng.sample::<f64, _>(StandardNormal) * sqrt_cell);
            for (x, w) in dp.iter_mut().zip(&self.past_widths) {
                *x = rng.sample::<f64, _>(StandardNormal) * w.sqrt();
            }
            for r in 0..rows {
                let lw = &self.l_weights[r];
                let l: f64 = lw.iter().zip(&dw[..lw.len()]).map(|(w, z)| w * z).sum();
                let q: f64 = self.q_weights[r].iter().zip(&dp).map(|(w, z)| w * z).sum();
                l_vals[r * d + k] = self.c_h * l;
                q_vals[r * d + k] = self.c_h * q;
            }
        }
        DecomposedIncrement {
            s: self.s,
            eps: self.eps,
            l_part: SampledPath::new(self.times.clone(), d, l_vals).expect("shape"),
            q_part: SampledPath::new(self.times.clone(), d, q_vals).expect("shape"),
        }
    }

    pub fn sample_indexed(&self, seed: u64, index: u64) -> DecomposedIncrement {
        self.sample(&mut rng::stream(seed, TAG_MVN, index))
    }
}

/// `n_paths` independent decompositions of the increment over `[s, s+ε]`,
/// with `spec.steps()` output steps inside the window.
pub fn mvn_decompose(
    spec: &FbmSpec,
    s: f64,
    eps: f64,
    truncation: Option<f64>,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<DecomposedIncrement>> {
    spec.validate()?;
    let opts = MvnOptions { output_steps: spec.steps(), truncation, ..MvnOptions::default() };
    let dec = MvnDecomposer::new(spec.hurst, spec.dim, s, eps, &opts)?;
    Ok((0..n_paths as u64).into_par_iter().map(|i| dec.sample_indexed(seed, i)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct LqScalingRow {
    /// `"L"` or `"Q"`.
    pub part: String,
    /// Relative position `u` in the window.
    pub u: f64,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LqScalingReport {
    pub hurst: f64,
    pub s: f64,
    pub eps: f64,
    pub n_paths: usize,
    pub rows: Vec<LqScalingRow>,
    pub min_p_value: f64,
}

/// Two-sample KS tests of `(L, Q)_{s, s+εu}` against `ε^H (L, Q)_{0, u}`
/// at `u = k/steps`, one coordinate at a time.
pub fn lq_scaling_check(hurst: f64, s: f64, eps: f64, steps: usize, n_paths: usize, seed: u64) -> Result<LqScalingReport> {
    let opts = MvnOptions { output_steps: steps, ..MvnOptions::default() };
    let window = MvnDecomposer::new(hurst, 1, s, eps, &opts)?;
    let unit = MvnDecomposer::new(hurst, 1, 0.0, 1.0, &opts)?;
    let scale = eps.powf(hurst);
    let draw = |dec: &MvnDecomposer, seed: u64, c: f64| -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let x = dec.sample_indexed(seed, i);
                let pick = |p: &SampledPath| (1..=steps).map(|k| c * p.point(k)[0]).collect::<Vec<f64>>();
                (pick(&x.l_part), pick(&x.q_part))
            })
            .collect()
    };
    let a = draw(&window, rng::child_seed(seed, 1), 1.0);
    let b = draw(&unit, rng::child_seed(seed, 2), scale);
    let mut rows = Vec::new();
    for k in 0..steps {
        for (part, get) in [("L", 0usize), ("Q", 1)] {
            let col = |xs: &[(Vec<f64>, Vec<f64>)]| -> Vec<f64> {
                xs.iter().map(|r| if get == 0 { r.0[k] } else { r.1[k] }).collect()
            };
            let ks = stats::ks_two_sample(&col(&a), &col(&b));
            rows.push(LqScalingRow {
                part: part.into(),
                u: (k + 1) as f64 / steps as f64,
                statistic: ks.statistic,
                p_value: ks.p_value,
            });
        }
    }
    let min_p_value = rows.iter().map(|r| r.p_value).fold(1.0, f64::min);
    Ok(LqScalingReport { hurst, s, eps, n_paths, rows, min_p_value })
}
