//! Experiment plumbing behind the command-line tool: config files, single
//! runs, the accuracy benchmark, cost scans and JSON reports.

pub mod benchmark;
pub mod config;
pub mod report;
pub mod runner;

pub use benchmark::{run_benchmark, BenchmarkResult, TABLE3_SYSTEMS};
pub use config::KeyValueConfig;
pub use report::{nonlinear_recall, support_metrics, ExperimentReport};
pub use runner::{
    catalog_run_config, default_epsilon, run, DataSpec, Method, MethodConfig, RunConfig,
};

use thiserror::Error;

use crate::cost::{
    catalog_sweep, koopman_sweep, parse_schedule, CostConstants, CostError, SweepPoint,
};
use crate::dynamics::DynamicsError;
use crate::library::LibraryError;
use crate::merinda::MerindaError;
use crate::sindy::SindyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags or arguments.
    #[error("{0}")]
    Usage(String),
    /// Malformed or unreadable config.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Sindy(#[from] SindyError),
    #[error(transparent)]
    Merinda(#[from] MerindaError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Usage and configuration problems map to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Usage(_)
                | HarnessError::Config(_)
                | HarnessError::Dynamics(DynamicsError::UnknownSystem { .. })
                | HarnessError::Merinda(MerindaError::InvalidConfig(_))
                | HarnessError::Sindy(SindyError::InvalidConfig(_))
                | HarnessError::Cost(CostError::Invalid(_))
        )
    }
}

/// Worker count from `MERINDA_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>, HarnessError> {
    match std::env::var("MERINDA_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Config(format!(
                "MERINDA_THREADS must be a positive integer, got '{v}'"
            ))),
        },
    }
}

/// Cost constants from defaults overridden by a config file.
pub fn cost_constants(config: Option<&KeyValueConfig>) -> Result<CostConstants, HarnessError> {
    let mut constants = CostConstants::default();
    if let Some(config) = config {
        config.ensure_known(&CostConstants::KEYS)?;
        for (key, value) in config.iter() {
            constants.set(key, value)?;
        }
    }
    Ok(constants)
}

/// Points to evaluate in a cost scan.
#[derive(Debug, Clone)]
pub enum ScanSource {
    /// `N,M` lines.
    Schedule(String),
    Catalog,
}

pub fn cost_scan(
    source: &ScanSource,
    constants: &CostConstants,
) -> Result<Vec<SweepPoint>, HarnessError> {
    Ok(match source {
        ScanSource::Schedule(text) => koopman_sweep(&parse_schedule(text)?, constants)?,
        ScanSource::Catalog => catalog_sweep(constants)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_config_overrides_defaults() {
        let cfg = KeyValueConfig::parse("H = 10\np_m = 0.5\n").unwrap();
        let c = cost_constants(Some(&cfg)).unwrap();
        assert_eq!(c.h, 10);
        assert_eq!(c.p_m, 0.5);
        assert_eq!(c.v, CostConstants::default().v);
        let bad = KeyValueConfig::parse("Q = 1\n").unwrap();
        assert!(cost_constants(Some(&bad)).unwrap_err().is_usage());
    }

    #[test]
    fn scan_sources() {
        let c = CostConstants::default();
        assert_eq!(cost_scan(&ScanSource::Catalog, &c).unwrap().len(), 5);
        let pts = cost_scan(&ScanSource::Schedule("2,3\n3,2\n5,1\n".into()), &c).unwrap();
        assert_eq!(pts.len(), 3);
    }
}
