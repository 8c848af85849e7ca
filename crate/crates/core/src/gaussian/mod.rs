//! Fractional Brownian motion: exact and FFT samplers, the Mandelbrot–van Ness
//! past/future split, conditional-variance diagnostics, small-ball and
//! roughness statistics.

mod conditional;
mod mvn;
mod path;
mod roughness;
pub(crate) mod sampler;
mod smallball;

pub use conditional::{conditional_increment_variance, min_conditional_covariance, ConditionalCovarianceReport};
pub use mvn::{
    c_h_calibrated, c_h_closed_form, lq_scaling_check, mvn_decompose, DecomposedIncrement, LqScalingReport, LqScalingRow,
    MvnDecomposer, MvnOptions,
};
pub use path::SampledPath;
pub use roughness::{holder_roughness, unit_net};
pub use sampler::{sample_fbm, FbmMethod, FbmSampler};
pub use smallball::{
    small_ball_decay_fit, small_ball_mc, small_ball_splitting, DecayFit, SmallBallEstimate, SmallBallVariant,
    SplittingEstimate, SplittingOptions,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `R_H(t, s) = ½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn covariance_rh(hurst: f64, s: f64, t: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

/// Covariance of the increments `B_b − B_a` and `B_e − B_c`.
pub fn increment_covariance(hurst: f64, (a, b): (f64, f64), (c, e): (f64, f64)) -> f64 {
    covariance_rh(hurst, b, e) - covariance_rh(hurst, b, c) - covariance_rh(hurst, a, e) + covariance_rh(hurst, a, c)
}

/// Hurst index, time grid and number of i.i.d. components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub grid: Vec<f64>,
    pub dim: usize,
}

impl FbmSpec {
    pub fn new(hurst: f64, grid: Vec<f64>, dim: usize) -> Result<Self> {
        let spec = FbmSpec { hurst, grid, dim };
        spec.validate()?;
        Ok(spec)
    }

    /// `steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(hurst: f64, horizon: f64, steps: usize, dim: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::Domain("uniform grid needs horizon > 0 and steps >= 1".into()));
        }
        let grid = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        Self::new(hurst, grid, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Domain(format!("Hurst parameter {} outside (0, 1)", self.hurst)));
        }
        if self.dim == 0 {
            return Err(Error::Domain("fBM needs at least one component".into()));
        }
        if self.grid.len() < 2 || self.grid[0] != 0.0 {
            return Err(Error::Domain("grid must start at 0 and have at least two points".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("validated grid")
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        let dt = self.horizon() / self.steps() as f64;
        self.grid.iter().enumerate().all(|(i, t)| (t - i as f64 * dt).abs() <= 1e-12 * self.horizon())
    }
}
