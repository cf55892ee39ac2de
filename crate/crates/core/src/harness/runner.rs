//! Single recovery runs with either method, producing reports.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{nonlinear_recall, peak_memory_bytes, support_metrics, ExperimentReport};
use super::HarnessError;
use crate::dynamics::{add_noise, catalog_system, NoiseSpec, SystemSpec, Trajectory};
use crate::library::{CoefficientMatrix, PolynomialLibrary};
use crate::merinda::{system_preset, train, tuned_config, RecoveryResult, TrainConfig};
use crate::sindy::{reconstruction_error, stlsq_recover, StlsqConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sindy,
    Merinda,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sindy => "sindy",
            Method::Merinda => "merinda",
        }
    }
}

/// Where the run's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSpec {
    /// A catalog system simulated at its defaults. The noise seed is the
    /// run seed.
    Catalog { system: String, noise: NoiseSpec },
    /// A trajectory CSV fitted with a library of the given order.
    Csv { path: PathBuf, library_order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Sindy(StlsqConfig),
    Merinda(TrainConfig),
}

impl MethodConfig {
    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Sindy(_) => Method::Sindy,
            MethodConfig::Merinda(_) => Method::Merinda,
        }
    }
}

/// Everything besides the seed that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSpec,
    pub method: MethodConfig,
    /// Reconstruction-MSE acceptance threshold.
    pub epsilon: Option<f64>,
}

/// Acceptance threshold on reconstruction MSE for catalog systems that have
/// one.
pub fn default_epsilon(system: &str) -> Option<f64> {
    match system {
        "lotka" => Some(0.1),
        "lorenz" => Some(5.0),
        _ => None,
    }
}

/// Method defaults for a catalog system: its STLSQ threshold, or the tuned
/// training preset with the true support size as target sparsity.
pub fn default_method_config(method: Method, system: Option<&SystemSpec>) -> MethodConfig {
    match method {
        Method::Sindy => MethodConfig::Sindy(StlsqConfig {
            threshold: system.map_or(StlsqConfig::default().threshold, |s| s.sindy_threshold),
            ..StlsqConfig::default()
        }),
        Method::Merinda => MethodConfig::Merinda(system.map_or_else(tuned_config, system_preset)),
    }
}

/// Catalog run at the system's defaults on clean data.
pub fn catalog_run_config(system: &str, method: Method) -> Result<RunConfig, HarnessError> {
    let spec = catalog_system(system)?;
    Ok(RunConfig {
        data: DataSpec::Catalog {
            system: spec.name.to_string(),
            noise: NoiseSpec::none(),
        },
        method: default_method_config(method, Some(&spec)),
        epsilon: default_epsilon(spec.name),
    })
}

/// Outputs of a run beyond the report.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub coefficients: CoefficientMatrix,
    /// MERINDA only.
    pub training: Option<RecoveryResult>,
}

struct LoadedData {
    name: String,
    system: Option<SystemSpec>,
    trajectory: Trajectory,
    library: Arc<PolynomialLibrary>,
}

fn load(data: &DataSpec, seed: u64) -> Result<LoadedData, HarnessError> {
    match data {
        DataSpec::Catalog { system, noise } => {
            let spec = catalog_system(system)?;
            let clean = spec.default_trajectory()?;
            let noise = NoiseSpec { seed, ..*noise };
            Ok(LoadedData {
                name: spec.name.to_string(),
                trajectory: add_noise(&clean, &noise),
                library: spec.library().clone(),
                system: Some(spec),
            })
        }
        DataSpec::Csv {
            path,
            library_order,
        } => {
            let file = std::fs::File::open(path).map_err(|e| {
                HarnessError::Usage(format!("cannot open data {}: {e}", path.display()))
            })?;
            let trajectory = Trajectory::read_csv(file)?;
            let library = Arc::new(PolynomialLibrary::for_system(
                trajectory.n_states(),
                trajectory.n_inputs(),
                *library_order,
            )?);
            Ok(LoadedData {
                name: path.display().to_string(),
                system: None,
                trajectory,
                library,
            })
        }
    }
}

/// Runs one recovery. The seed drives measurement noise and, for MERINDA,
/// initialization and window shuffling; the report's config records the
/// effective values.
pub fn run(config: &RunConfig, seed: u64) -> Result<RunOutcome, HarnessError> {
    let start = Instant::now();
    let loaded = load(&config.data, seed)?;
    let truth = loaded.system.as_ref().map(|s| &s.true_coefficients);
    let mut effective = config.clone();
    if let DataSpec::Catalog { noise, .. } = &mut effective.data {
        noise.seed = seed;
    }

    let (coefficients, reconstruction, sweeps_used, training) = match &mut effective.method {
        MethodConfig::Sindy(stlsq) => {
            let fit = stlsq_recover(&loaded.trajectory, loaded.library.clone(), stlsq)?;
            let rec = reconstruction_error(&fit.coefficients, &loaded.trajectory)?;
            (
                fit.coefficients,
                (rec.mse, rec.diverged),
                Some(fit.sweeps_used),
                None,
            )
        }
        MethodConfig::Merinda(train_config) => {
            train_config.seed = seed;
            let result = train(
                &loaded.trajectory,
                loaded.library.clone(),
                train_config,
                truth,
            )?;
            (
                result.coefficients.clone(),
                (result.reconstruction_mse, result.reconstruction_diverged),
                None,
                Some(result),
            )
        }
    };

    let coefficient_mse = truth.map(|t| coefficients.mse(t)).transpose()?;
    let (precision, recall) = match truth {
        Some(t) => {
            let (p, r) = support_metrics(&coefficients, t);
            (Some(p), Some(r))
        }
        None => (None, None),
    };
    let pass = !reconstruction.1 && config.epsilon.is_none_or(|eps| reconstruction.0 <= eps);
    let report = ExperimentReport {
        system: loaded.name,
        method: config.method.method(),
        seed,
        config: effective,
        reconstruction_mse: reconstruction.0,
        reconstruction_diverged: reconstruction.1,
        coefficient_mse,
        support_precision: precision,
        support_recall: recall,
        nonlinear_recall: truth.map(|t| nonlinear_recall(&coefficients, t)),
        mse: reconstruction.0,
        support_size: coefficients.sparsity(),
        sweeps_used,
        epochs: training.as_ref().map(|t| t.loss_history.len()),
        final_loss: training
            .as_ref()
            .and_then(|t| t.loss_history.last().copied()),
        epsilon: config.epsilon,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
        peak_memory_estimate: peak_memory_bytes(),
    };
    Ok(RunOutcome {
        report,
        coefficients,
        training,
    })
}
