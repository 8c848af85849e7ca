//! Rough paths driven by fractional Brownian motion on sub-Riemannian
//! spaces: truncated tensor algebra and free nilpotent groups, fBM samplers,
//! the step-`l` Euler scheme, control distances, Newtonian capacities and
//! Monte Carlo hitting experiments.

pub mod capacity;
pub mod distance;
pub mod error;
pub mod fields;
pub mod gaussian;
pub mod hitting;
pub mod lie;
pub mod optim;
pub mod rde;
pub mod report;
pub mod rng;
pub mod signatures;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
