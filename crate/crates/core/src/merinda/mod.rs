//! GRU flow recovery: a GRU summarizes each observation window, a dense head
//! emits model coefficients and input shifts, and training minimizes the
//! ODE loss of the emitted model through a differentiable RK4 solve.

pub mod checkpoint;
pub mod gru;
pub mod ode_loss;
pub mod optim;
mod recover;
pub mod train;

pub use checkpoint::Checkpoint;
pub use gru::{GruModel, GruStepCache, HeadOutput, ParamBlock};
pub use ode_loss::{ode_loss, LossValue, DIVERGED_LOSS};
pub use recover::{recover, system_preset, tuned_config, DataSource, Recovery};
pub use train::{
    batch_gradient, batch_loss, gradient_check, top_k_mask, train, Aggregation, BatchGradient,
    RecoveryResult, TrainConfig, WindowSet,
};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::library::LibraryError;
use crate::sindy::SindyError;

#[derive(Debug, Error)]
pub enum MerindaError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("trajectory has {samples} samples, fewer than one window of {window}")]
    TooShort { samples: usize, window: usize },
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("non-finite gradient in parameter block {block}")]
    GradientOverflow { block: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Sindy(#[from] SindyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
