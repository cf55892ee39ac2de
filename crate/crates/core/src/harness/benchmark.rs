//! Accuracy benchmark over systems, methods and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::report::ExperimentReport;
use super::runner::{catalog_run_config, run, Method};
use super::HarnessError;

/// The four systems of the accuracy table.
pub const TABLE3_SYSTEMS: [&str; 4] = ["lotka", "lorenz", "f8", "pathogenic"];

pub const METHODS: [Method; 2] = [Method::Sindy, Method::Merinda];

/// Systems of a named suite.
pub fn suite_systems(suite: &str) -> Result<&'static [&'static str], HarnessError> {
    match suite {
        "table3" => Ok(&TABLE3_SYSTEMS),
        other => Err(HarnessError::Usage(format!(
            "unknown suite '{other}' (valid: table3)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    pub runs: usize,
}

fn stats(values: &[f64]) -> CellStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    CellStats {
        mean,
        std,
        runs: values.len(),
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// Ordered by system, then method, then seed.
    pub reports: Vec<ExperimentReport>,
    pub cells: BTreeMap<(String, Method), CellStats>,
    pub systems: Vec<String>,
}

/// Runs every `(system, method, seed)` cell for seeds `0..seeds`. Cells run
/// in parallel, each with its own data and model, and are collected in a
/// fixed order.
pub fn run_benchmark(suite: &str, seeds: u64) -> Result<BenchmarkResult, HarnessError> {
    if seeds == 0 {
        return Err(HarnessError::Usage("--seeds must be at least 1".into()));
    }
    let systems = suite_systems(suite)?;
    let mut cells = Vec::new();
    for &system in systems {
        for method in METHODS {
            for seed in 0..seeds {
                cells.push((system, method, seed));
            }
        }
    }
    let reports: Vec<ExperimentReport> = cells
        .par_iter()
        .map(|&(system, method, seed)| {
            let config = catalog_run_config(system, method)?;
            Ok(run(&config, seed)?.report)
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut grouped: BTreeMap<(String, Method), Vec<f64>> = BTreeMap::new();
    for r in &reports {
        grouped
            .entry((r.system.clone(), r.method))
            .or_default()
            .push(r.reconstruction_mse);
    }
    let cells = grouped
        .into_iter()
        .map(|(key, values)| (key, stats(&values)))
        .collect();
    Ok(BenchmarkResult {
        reports,
        cells,
        systems: systems.iter().map(|s| s.to_string()).collect(),
    })
}

impl BenchmarkResult {
    /// Table-shaped summary of reconstruction MSE, one row per system in
    /// sorted order: `system,sindy_mean,sindy_std,merinda_mean,merinda_std`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("system,sindy_mean,sindy_std,merinda_mean,merinda_std\n");
        let mut systems = self.systems.clone();
        systems.sort();
        for system in systems {
            let _ = write!(out, "{system}");
            for method in METHODS {
                match self.cells.get(&(system.clone(), method)) {
                    Some(c) => {
                        let _ = write!(out, ",{:.6e},{:.6e}", c.mean, c.std);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `summary.csv` and `runs/<system>_<method>_seed<k>.json`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let runs = dir.join("runs");
        std::fs::create_dir_all(&runs)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        for r in &self.reports {
            let path = runs.join(format!(
                "{}_{}_seed{}.json",
                r.system,
                r.method.name(),
                r.seed
            ));
            let json =
                serde_json::to_string_pretty(r).map_err(|e| HarnessError::Config(e.to_string()))?;
            std::fs::write(path, json + "\n")?;
        }
        Ok(())
    }
}
