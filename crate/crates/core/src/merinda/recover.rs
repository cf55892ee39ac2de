//! End-to-end recovery: data in, trained model and quality verdict out.

use std::sync::Arc;

use super::train::{train, RecoveryResult, TrainConfig};
use super::MerindaError;
use crate::dynamics::{add_noise, catalog_system, NoiseSpec, SystemSpec, Trajectory};
use crate::library::{CoefficientMatrix, PolynomialLibrary};

/// Where the training data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Simulate a catalog system at its defaults, optionally with noise.
    Catalog { name: String, noise: NoiseSpec },
    /// Externally supplied data with a library order.
    Data {
        trajectory: Trajectory,
        library_order: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub system: Option<SystemSpec>,
    pub data: Trajectory,
    pub result: RecoveryResult,
    /// Acceptance threshold on reconstruction MSE, when one applies.
    pub epsilon: Option<f64>,
    pub pass: bool,
}

/// Training settings used for catalog systems: the true support size as
/// the target sparsity reached over four pruning rounds, a cosine-decayed
/// learning rate and a consistency penalty that keeps the per-window models
/// in agreement.
pub fn system_preset(system: &SystemSpec) -> TrainConfig {
    TrainConfig {
        target_sparsity: Some(system.true_coefficients.sparsity()),
        ..tuned_config()
    }
}

/// The catalog preset without a target sparsity.
pub fn tuned_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        final_learning_rate: Some(1e-5),
        consistency_weight: 10.0,
        prune_stages: 4,
        ..TrainConfig::default()
    }
}

/// Loads or generates data, trains at the system's library order and
/// evaluates both error metrics. `pass` is `reconstruction_mse <= epsilon`
/// (always true without an epsilon, unless the reconstruction diverged).
pub fn recover(
    source: &DataSource,
    config: &TrainConfig,
    epsilon: Option<f64>,
) -> Result<Recovery, MerindaError> {
    let (system, data, library) = match source {
        DataSource::Catalog { name, noise } => {
            let system = catalog_system(name)?;
            let clean = system.default_trajectory()?;
            let data = add_noise(&clean, noise);
            let library = system.library().clone();
            (Some(system), data, library)
        }
        DataSource::Data {
            trajectory,
            library_order,
        } => {
            let library = Arc::new(PolynomialLibrary::for_system(
                trajectory.n_states(),
                trajectory.n_inputs(),
                *library_order,
            )?);
            (None, trajectory.clone(), library)
        }
    };
    let truth: Option<&CoefficientMatrix> = system.as_ref().map(|s| &s.true_coefficients);
    let result = train(&data, library, config, truth)?;
    let pass = !result.reconstruction_diverged
        && epsilon.is_none_or(|eps| result.reconstruction_mse <= eps);
    Ok(Recovery {
        system,
        data,
        result,
        epsilon,
        pass,
    })
}
