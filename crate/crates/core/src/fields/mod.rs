//! Polynomial vector fields with exact brackets, Hörmander diagnostics,
//! growth vectors and Taylor/Euler coefficients.

mod poly;
mod registry;
mod system;

pub use poly::{CompiledField, Poly, PolyVectorField, TermJson};
pub use registry::{builtin, builtin_names, SystemMeta};
pub use system::{GramReport, GrowthReport, SystemJson, VectorFieldSystem};
