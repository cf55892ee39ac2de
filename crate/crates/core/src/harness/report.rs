//! Machine-readable run reports.

use serde::{Deserialize, Serialize};

use super::runner::{Method, RunConfig};
use crate::library::CoefficientMatrix;

/// One recovery run. `config` replays the run exactly together with `seed`;
/// `wall_time` and `peak_memory_estimate` are informational only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub system: String,
    pub method: Method,
    pub seed: u64,
    pub config: RunConfig,
    pub reconstruction_mse: f64,
    pub reconstruction_diverged: bool,
    /// Against the ground truth; absent for external data.
    pub coefficient_mse: Option<f64>,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
    /// Recall over the true terms of degree two or more.
    pub nonlinear_recall: Option<f64>,
    /// Reconstruction MSE, under the name the coefficient reports use.
    pub mse: f64,
    pub support_size: usize,
    /// STLSQ sweeps; absent for MERINDA.
    pub sweeps_used: Option<usize>,
    /// Completed epochs; absent for SINDy.
    pub epochs: Option<usize>,
    pub final_loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub pass: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Process peak resident set in bytes, when the platform reports it.
    pub peak_memory_estimate: Option<u64>,
}

/// `(precision, recall)` of the estimated support against the true one.
/// An empty estimate has precision 0; an empty truth has recall 1.
pub fn support_metrics(estimate: &CoefficientMatrix, truth: &CoefficientMatrix) -> (f64, f64) {
    let est = estimate.support();
    let tru = truth.support();
    let hits = est.iter().filter(|e| tru.contains(e)).count() as f64;
    let precision = if est.is_empty() {
        0.0
    } else {
        hits / est.len() as f64
    };
    let recall = if tru.is_empty() {
        1.0
    } else {
        hits / tru.len() as f64
    };
    (precision, recall)
}

/// Fraction of the true terms of degree two or more that the estimate keeps;
/// 1 when the truth has none.
pub fn nonlinear_recall(estimate: &CoefficientMatrix, truth: &CoefficientMatrix) -> f64 {
    let lib = truth.library();
    let est = estimate.support();
    let nonlinear: Vec<_> = truth
        .support()
        .into_iter()
        .filter(|&(_, term)| lib.degree(term) >= 2)
        .collect();
    if nonlinear.is_empty() {
        return 1.0;
    }
    let hits = nonlinear.iter().filter(|e| est.contains(e)).count();
    hits as f64 / nonlinear.len() as f64
}

/// Peak resident set size of this process (`VmHWM`), Linux only.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::PolynomialLibrary;
    use std::sync::Arc;

    #[test]
    fn support_metric_cases() {
        let lib = Arc::new(PolynomialLibrary::new(2, 1).unwrap());
        let mut truth = CoefficientMatrix::zeros(lib.clone(), 2);
        truth.set(0, 1, 1.0);
        truth.set(1, 2, 1.0);
        let mut est = CoefficientMatrix::zeros(lib.clone(), 2);
        assert_eq!(support_metrics(&est, &truth), (0.0, 0.0));
        est.set(0, 1, 0.5);
        est.set(0, 0, 0.5);
        assert_eq!(support_metrics(&est, &truth), (0.5, 0.5));
        est.set(1, 2, 2.0);
        est.set(0, 0, 0.0);
        assert_eq!(support_metrics(&est, &truth), (1.0, 1.0));
    }

    #[test]
    fn nonlinear_recall_ignores_linear_terms() {
        let lib = Arc::new(PolynomialLibrary::new(2, 2).unwrap());
        let mut truth = CoefficientMatrix::zeros(lib.clone(), 2);
        truth.set(0, 1, 1.0);
        truth.set(0, 4, 1.0);
        truth.set(1, 5, 1.0);
        let mut est = CoefficientMatrix::zeros(lib.clone(), 2);
        est.set(0, 4, 0.3);
        assert_eq!(nonlinear_recall(&est, &truth), 0.5);
        est.set(1, 5, 0.3);
        assert_eq!(nonlinear_recall(&est, &truth), 1.0);
        let linear = CoefficientMatrix::zeros(lib, 2);
        assert_eq!(nonlinear_recall(&est, &linear), 1.0);
    }

    #[test]
    fn peak_memory_is_plausible_when_present() {
        if let Some(bytes) = peak_memory_bytes() {
            assert!(bytes > 1024);
        }
    }
}
