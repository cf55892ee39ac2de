//! Analytic memory and energy models of the recovery pipeline, the (N, M)
//! exchange sweep and Pearson correlation between the two costs.
//!
//! Memory counts are exact integers. Energy multiplies exact integer
//! operation counts by the (floating) power constants, so integer constants
//! give exact integer results.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::dynamics::{catalog_system, CATALOG_NAMES};
use crate::library::binomial;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost model overflow for N={n}, M={m}")]
    Overflow { n: u64, m: u64 },
    #[error("invalid cost parameters: {0}")]
    Invalid(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryModelParams {
    pub n: u64,
    pub m: u64,
    /// GRU / latent layer width.
    pub v: u64,
    /// Bits per latent-layer weight.
    pub b_c: u64,
    /// Bits per real number.
    pub b_r: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    pub n: u64,
    pub m: u64,
    pub v: u64,
    /// Convolution weights per epoch.
    pub w_c: u64,
    pub p_f_c: f64,
    pub p_b_c: f64,
    pub p_f_a: f64,
    pub p_b_a: f64,
    pub p_f_l: f64,
    pub p_b_l: f64,
    /// Energy per multiplication.
    pub p_m: f64,
    /// Sample horizon.
    pub h: u64,
    /// Epochs.
    pub t: u64,
    /// Multiplier on the whole estimate; 1 leaves the model unchanged.
    pub stiffness: f64,
}

fn library_terms(n: u64, m: u64) -> Result<u128, CostError> {
    binomial(n.checked_add(m).ok_or(CostError::Overflow { n, m })?, m)
        .ok_or(CostError::Overflow { n, m })
}

/// `N V b_c + (N + C + N C + max(N^2, M^2)) b_r` with `C = C(M+N, M)`.
pub fn memory_model(p: &MemoryModelParams) -> Result<u128, CostError> {
    let overflow = CostError::Overflow { n: p.n, m: p.m };
    let (n, m) = (p.n as u128, p.m as u128);
    let c = library_terms(p.n, p.m)?;
    let latent = n
        .checked_mul(p.v as u128)
        .and_then(|x| x.checked_mul(p.b_c as u128));
    let reals = n
        .checked_add(c)
        .and_then(|x| x.checked_add(n.checked_mul(c)?))
        .and_then(|x| x.checked_add(n.checked_mul(n)?.max(m.checked_mul(m)?)))
        .and_then(|x| x.checked_mul(p.b_r as u128));
    latent
        .zip(reals)
        .and_then(|(a, b)| a.checked_add(b))
        .ok_or(overflow)
}

/// Integer operation counts behind the energy model for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyCounts {
    /// `N V w_c`
    pub latent: u128,
    /// `N`
    pub autodiff: u128,
    /// `C`
    pub library: u128,
    /// `H C^2`
    pub regression_mults: u128,
    /// `H N C`
    pub solver_mults: u128,
}

pub fn energy_counts(p: &EnergyModelParams) -> Result<EnergyCounts, CostError> {
    let overflow = || CostError::Overflow { n: p.n, m: p.m };
    let (n, h) = (p.n as u128, p.h as u128);
    let c = library_terms(p.n, p.m)?;
    Ok(EnergyCounts {
        latent: n
            .checked_mul(p.v as u128)
            .and_then(|x| x.checked_mul(p.w_c as u128))
            .ok_or_else(overflow)?,
        autodiff: n,
        library: c,
        regression_mults: c
            .checked_mul(c)
            .and_then(|x| x.checked_mul(h))
            .ok_or_else(overflow)?,
        solver_mults: h
            .checked_mul(n)
            .and_then(|x| x.checked_mul(c))
            .ok_or_else(overflow)?,
    })
}

/// `T [N V w_c (p_f_c + p_b_c) + N (p_f_a + p_b_a) + C (p_f_l + p_b_l)
/// + H C^2 p_m + H N C p_m]`, times the stiffness multiplier.
pub fn energy_model(p: &EnergyModelParams) -> Result<f64, CostError> {
    if p.t == 0 {
        return Err(CostError::Invalid("T must be at least 1".into()));
    }
    let powers = [
        p.p_f_c,
        p.p_b_c,
        p.p_f_a,
        p.p_b_a,
        p.p_f_l,
        p.p_b_l,
        p.p_m,
        p.stiffness,
    ];
    if powers.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CostError::Invalid(
            "power constants and stiffness must be finite and non-negative".into(),
        ));
    }
    let k = energy_counts(p)?;
    let epoch = k.latent as f64 * (p.p_f_c + p.p_b_c)
        + k.autodiff as f64 * (p.p_f_a + p.p_b_a)
        + k.library as f64 * (p.p_f_l + p.p_b_l)
        + k.regression_mults as f64 * p.p_m
        + k.solver_mults as f64 * p.p_m;
    Ok(epoch * p.t as f64 * p.stiffness)
}

/// Platform constants shared by both models. `N` and `M` come from the
/// sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConstants {
    pub v: u64,
    pub b_c: u64,
    pub b_r: u64,
    pub w_c: u64,
    pub p_f_c: f64,
    pub p_b_c: f64,
    pub p_f_a: f64,
    pub p_b_a: f64,
    pub p_f_l: f64,
    pub p_b_l: f64,
    pub p_m: f64,
    pub h: u64,
    pub t: u64,
    pub stiffness: f64,
}

impl Default for CostConstants {
    /// Latent passes cost ten times the autodiff and library passes; a
    /// 2000-sample horizon and a single epoch.
    fn default() -> Self {
        Self {
            v: 16,
            b_c: 32,
            b_r: 32,
            w_c: 1,
            p_f_c: 10.0,
            p_b_c: 10.0,
            p_f_a: 1.0,
            p_b_a: 1.0,
            p_f_l: 1.0,
            p_b_l: 1.0,
            p_m: 0.01,
            h: 2000,
            t: 1,
            stiffness: 1.0,
        }
    }
}

impl CostConstants {
    pub const KEYS: [&'static str; 14] = [
        "V",
        "b_c",
        "b_r",
        "w_c",
        "p_f_c",
        "p_b_c",
        "p_f_a",
        "p_b_a",
        "p_f_l",
        "p_b_l",
        "p_m",
        "H",
        "T",
        "stiffness",
    ];

    /// Sets one constant by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CostError> {
        let int = |v: &str| {
            v.parse::<u64>().map_err(|_| {
                CostError::Invalid(format!("{key} must be a non-negative integer, got '{v}'"))
            })
        };
        let real = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| {
                    CostError::Invalid(format!("{key} must be a non-negative number, got '{v}'"))
                })
        };
        match key {
            "V" => self.v = int(value)?,
            "b_c" => self.b_c = int(value)?,
            "b_r" => self.b_r = int(value)?,
            "w_c" => self.w_c = int(value)?,
            "H" => self.h = int(value)?,
            "T" => self.t = int(value)?,
            "p_f_c" => self.p_f_c = real(value)?,
            "p_b_c" => self.p_b_c = real(value)?,
            "p_f_a" => self.p_f_a = real(value)?,
            "p_b_a" => self.p_b_a = real(value)?,
            "p_f_l" => self.p_f_l = real(value)?,
            "p_b_l" => self.p_b_l = real(value)?,
            "p_m" => self.p_m = real(value)?,
            "stiffness" => self.stiffness = real(value)?,
            _ => {
                return Err(CostError::Invalid(format!(
                    "unknown cost key '{key}' (valid: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn memory_params(&self, n: u64, m: u64) -> MemoryModelParams {
        MemoryModelParams {
            n,
            m,
            v: self.v,
            b_c: self.b_c,
            b_r: self.b_r,
        }
    }

    pub fn energy_params(&self, n: u64, m: u64) -> EnergyModelParams {
        EnergyModelParams {
            n,
            m,
            v: self.v,
            w_c: self.w_c,
            p_f_c: self.p_f_c,
            p_b_c: self.p_b_c,
            p_f_a: self.p_f_a,
            p_b_a: self.p_b_a,
            p_f_l: self.p_f_l,
            p_b_l: self.p_b_l,
            p_m: self.p_m,
            h: self.h,
            t: self.t,
            stiffness: self.stiffness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: u64,
    pub m: u64,
    pub memory_bits: u128,
    pub energy_units: f64,
    pub label: Option<String>,
}

/// Exchange of polynomial order for state dimension at fixed accuracy:
/// quadratic at 2 states, then lower orders with lifted state counts.
pub const EXCHANGE_SCHEDULE: [(u64, u64); 3] = [(2, 3), (3, 2), (5, 1)];

/// Evaluates both models at every `(N, M)` pair of the schedule.
pub fn koopman_sweep(
    schedule: &[(u64, u64)],
    constants: &CostConstants,
) -> Result<Vec<SweepPoint>, CostError> {
    if schedule.is_empty() {
        return Err(CostError::Invalid("empty exchange schedule".into()));
    }
    schedule
        .iter()
        .map(|&(n, m)| {
            if n == 0 || m == 0 {
                return Err(CostError::Invalid(format!(
                    "schedule entry ({n}, {m}) needs N, M >= 1"
                )));
            }
            Ok(SweepPoint {
                n,
                m,
                memory_bits: memory_model(&constants.memory_params(n, m))?,
                energy_units: energy_model(&constants.energy_params(n, m))?,
                label: None,
            })
        })
        .collect()
}

/// One point per catalog system at its (state count, library order), labelled
/// with its nonlinear-term count, polynomial order and state count.
pub fn catalog_sweep(constants: &CostConstants) -> Result<Vec<SweepPoint>, CostError> {
    CATALOG_NAMES
        .iter()
        .map(|name| {
            let sys = catalog_system(name).expect("catalog names resolve");
            let (n, m) = (sys.n_states as u64, sys.library_order as u64);
            Ok(SweepPoint {
                n,
                m,
                memory_bits: memory_model(&constants.memory_params(n, m))?,
                energy_units: energy_model(&constants.energy_params(n, m))?,
                label: Some(format!(
                    "{}(NL={} PO={} SV={})",
                    sys.label, sys.nonlinear_term_count, sys.library_order, sys.n_states
                )),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from a t distribution with `len - 2` degrees of freedom.
    pub p_value: f64,
}

pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<Correlation, CostError> {
    if xs.len() != ys.len() {
        return Err(CostError::Invalid(format!(
            "{} x values and {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let len = xs.len();
    if len < 3 {
        return Err(CostError::UndefinedCorrelation(format!(
            "{len} points, at least 3 needed"
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / len as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CostError::UndefinedCorrelation("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (len - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Correlation { r, p_value })
}

/// Memory-energy correlation over sweep points.
pub fn sweep_correlation(points: &[SweepPoint]) -> Result<Correlation, CostError> {
    let memory: Vec<f64> = points.iter().map(|p| p.memory_bits as f64).collect();
    let energy: Vec<f64> = points.iter().map(|p| p.energy_units).collect();
    pearson_correlation(&memory, &energy)
}

/// `label,N,M,memory_bits,energy_units` rows, then `# pearson_r,<r>` and
/// `# p_value,<p>` footer lines when the correlation is defined.
pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> Result<(), CostError> {
    writeln!(out, "label,N,M,memory_bits,energy_units")?;
    for p in points {
        let label = p
            .label
            .clone()
            .unwrap_or_else(|| format!("N={} M={}", p.n, p.m));
        writeln!(
            out,
            "{},{},{},{},{}",
            label, p.n, p.m, p.memory_bits, p.energy_units
        )?;
    }
    if let Ok(c) = sweep_correlation(points) {
        writeln!(out, "# pearson_r,{}", c.r)?;
        writeln!(out, "# p_value,{}", c.p_value)?;
    }
    Ok(())
}

/// Parses an exchange schedule: one `N,M` pair per line; blank lines and
/// `#` comments are ignored.
pub fn parse_schedule(text: &str) -> Result<Vec<(u64, u64)>, CostError> {
    let mut schedule = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [n, m] => n.parse::<u64>().ok().zip(m.parse::<u64>().ok()),
            _ => None,
        };
        let (n, m) = parsed.ok_or_else(|| {
            CostError::Invalid(format!(
                "schedule line {}: expected 'N,M', got '{line}'",
                i + 1
            ))
        })?;
        schedule.push((n, m));
    }
    if schedule.is_empty() {
        return Err(CostError::Invalid("empty exchange schedule".into()));
    }
    Ok(schedule)
}
