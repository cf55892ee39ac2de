//! Benchmark dynamical systems, fixed-step RK4 integration and data
//! generation.

pub mod constants;
mod hudson_bay;
mod noise;
mod rk4;
mod systems;
mod trajectory;

pub use hudson_bay::{hudson_bay_dataset, HUDSON_BAY_PELTS};
pub use noise::{add_noise, NoiseKind, NoiseSpec};
pub use rk4::{integrate, integrate_from, rk4_step, FnField, VectorField, DIVERGENCE_GUARD};
pub use systems::{catalog_system, SystemSpec, CATALOG_NAMES};
pub(crate) use trajectory::format_f64 as trajectory_format;
pub use trajectory::Trajectory;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },
    #[error("unknown system '{name}' (valid: {valid})")]
    UnknownSystem { name: String, valid: String },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed trajectory csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
