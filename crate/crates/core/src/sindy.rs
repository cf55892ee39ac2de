//! Sparse regression baseline: ridge regression with sequential thresholding
//! (STLSQ) over a polynomial library, fitted to finite-difference
//! derivatives.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate_from, DynamicsError, Trajectory};
use crate::library::{
    finite_difference_derivatives, CoefficientMatrix, LibraryError, PolynomialLibrary,
};

/// Loss value reported for a reconstruction that diverged.
pub const DIVERGED_MSE: f64 = 1e12;

// Relative pivot floor for declaring the unregularized normal matrix singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SindyError {
    #[error("normal matrix is rank deficient at lambda = 0 (column {column}); use a positive ridge lambda")]
    RankDeficient { column: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlsqConfig {
    pub ridge_lambda: f64,
    pub threshold: f64,
    pub max_sweeps: usize,
}

impl Default for StlsqConfig {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-5,
            threshold: 0.05,
            max_sweeps: 10,
        }
    }
}

impl StlsqConfig {
    pub fn validate(&self) -> Result<(), SindyError> {
        if !self.ridge_lambda.is_finite() || self.ridge_lambda < 0.0 {
            return Err(SindyError::InvalidConfig(format!(
                "ridge_lambda must be finite and >= 0, got {}",
                self.ridge_lambda
            )));
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(SindyError::InvalidConfig(format!(
                "threshold must be finite and >= 0, got {}",
                self.threshold
            )));
        }
        if self.max_sweeps == 0 {
            return Err(SindyError::InvalidConfig("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solves `min ||design * a - targets[:, i]||^2 + lambda ||a||^2` for every
/// target column, returning the `n x P` coefficient values.
pub fn ridge_solve(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>, SindyError> {
    if design.nrows() != targets.nrows() {
        return Err(SindyError::Dimension(format!(
            "design has {} rows, targets {}",
            design.nrows(),
            targets.nrows()
        )));
    }
    let mut gram = design.tr_mul(design);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = design.tr_mul(targets);
    let factor = cholesky(&gram, lambda == 0.0)?;
    let p = design.ncols();
    let mut out = DMatrix::zeros(targets.ncols(), p);
    for col in 0..targets.ncols() {
        let b: Vec<f64> = rhs.column(col).iter().copied().collect();
        let a = cholesky_solve(&factor, &b);
        for (j, v) in a.into_iter().enumerate() {
            out[(col, j)] = v;
        }
    }
    Ok(out)
}

// Lower-triangular factor, row-major.
fn cholesky(a: &DMatrix<f64>, strict: bool) -> Result<Vec<f64>, SindyError> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let floor = if strict {
        PIVOT_TOLERANCE * max_diag * n as f64
    } else {
        0.0
    };
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) {
            return Err(SindyError::RankDeficient { column: j });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Outcome of sequential thresholding on a raw design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StlsqFit {
    /// `n x P` coefficients.
    pub values: DMatrix<f64>,
    pub sweeps_used: usize,
    /// Active mask after each sweep, `n x P` row-major.
    pub support_history: Vec<Vec<bool>>,
}

/// Sequential thresholding: ridge fit, zero entries below the threshold,
/// refit on the survivors, until the support stops changing.
pub fn stlsq_fit(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    config: &StlsqConfig,
) -> Result<StlsqFit, SindyError> {
    config.validate()?;
    let n = targets.ncols();
    let p = design.ncols();
    let mut values = ridge_solve(design, targets, config.ridge_lambda)?;
    let mut active = vec![true; n * p];
    let mut history = Vec::new();
    let mut sweeps_used = config.max_sweeps;

    for sweep in 1..=config.max_sweeps {
        let next: Vec<bool> = active
            .iter()
            .zip(values.transpose().iter())
            .map(|(&a, v)| a && v.abs() >= config.threshold)
            .collect();
        // values.transpose() iterates row-major over the n x P values.
        let changed = next != active;
        active = next;
        history.push(active.clone());
        if changed {
            values = refit(design, targets, &active, config.ridge_lambda)?;
        }
        if !changed {
            sweeps_used = sweep;
            break;
        }
    }
    Ok(StlsqFit {
        values,
        sweeps_used,
        support_history: history,
    })
}

fn refit(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    active: &[bool],
    lambda: f64,
) -> Result<DMatrix<f64>, SindyError> {
    let p = design.ncols();
    let mut values = DMatrix::zeros(targets.ncols(), p);
    for state in 0..targets.ncols() {
        let cols: Vec<usize> = (0..p).filter(|&j| active[state * p + j]).collect();
        if cols.is_empty() {
            continue;
        }
        let sub = design.select_columns(cols.iter());
        let target = targets.columns(state, 1).into_owned();
        let fit = ridge_solve(&sub, &target, lambda)?;
        for (k, &j) in cols.iter().enumerate() {
            values[(state, j)] = fit[(0, k)];
        }
    }
    Ok(values)
}

#[derive(Debug, Clone)]
pub struct StlsqResult {
    pub coefficients: CoefficientMatrix,
    pub sweeps_used: usize,
    /// States whose every coefficient was thresholded away.
    pub empty_states: Vec<usize>,
}

impl StlsqResult {
    pub fn empty_model(&self) -> bool {
        !self.empty_states.is_empty()
    }
}

/// STLSQ on a trajectory: finite-difference derivatives against the library
/// evaluated at `[states, inputs]`.
pub fn stlsq_recover(
    traj: &Trajectory,
    library: Arc<PolynomialLibrary>,
    config: &StlsqConfig,
) -> Result<StlsqResult, SindyError> {
    let n = traj.n_states();
    let m = traj.n_inputs();
    if library.n_vars() != n + m {
        return Err(SindyError::Dimension(format!(
            "library has {} variables, trajectory has {n} states and {m} inputs",
            library.n_vars()
        )));
    }
    let derivs = finite_difference_derivatives(traj)?;
    let points = DMatrix::from_fn(traj.len(), n + m, |i, j| {
        if j < n {
            traj.states()[(i, j)]
        } else {
            traj.inputs()[(i, j - n)]
        }
    });
    let design = library.evaluate(&points)?;
    let fit = stlsq_fit(&design, &derivs, config)?;
    let empty_states = (0..n)
        .filter(|&i| fit.values.row(i).iter().all(|&v| v == 0.0))
        .collect();
    Ok(StlsqResult {
        coefficients: CoefficientMatrix::from_values(library, fit.values)?,
        sweeps_used: fit.sweeps_used,
        empty_states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub mse: f64,
    pub diverged: bool,
}

/// Integrates the recovered model from the trajectory's first state over its
/// grid and returns the mean squared error over all states and samples.
pub fn reconstruction_error(
    coeffs: &CoefficientMatrix,
    traj: &Trajectory,
) -> Result<Reconstruction, SindyError> {
    reconstruction_error_shifted(coeffs, &vec![0.0; coeffs.n_inputs()], traj)
}

pub fn reconstruction_error_shifted(
    coeffs: &CoefficientMatrix,
    shifts: &[f64],
    traj: &Trajectory,
) -> Result<Reconstruction, SindyError> {
    if coeffs.n_states() != traj.n_states() || coeffs.n_inputs() != traj.n_inputs() {
        return Err(SindyError::Dimension(format!(
            "model has {} states / {} inputs, trajectory {} / {}",
            coeffs.n_states(),
            coeffs.n_inputs(),
            traj.n_states(),
            traj.n_inputs()
        )));
    }
    let field = coeffs.rhs_field_shifted(shifts);
    let predicted = match integrate_from(
        &field,
        &traj.initial_state(),
        traj.inputs(),
        traj.times()[0],
        traj.step(),
        traj.len(),
    ) {
        Ok(p) => p,
        Err(DynamicsError::IntegrationDiverged { .. }) => {
            return Ok(Reconstruction {
                mse: DIVERGED_MSE,
                diverged: true,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let diff = predicted.states() - traj.states();
    let mse = diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64;
    Ok(Reconstruction {
        mse: mse.min(DIVERGED_MSE),
        diverged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{catalog_system, integrate, FnField};
    use proptest::prelude::*;

    // Solves via an explicit Gauss-Jordan inverse of the normal matrix.
    fn brute_force(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
        let p = design.ncols();
        let mut aug = vec![vec![0.0; 2 * p]; p];
        for i in 0..p {
            for j in 0..p {
                aug[i][j] = (0..design.nrows())
                    .map(|r| design[(r, i)] * design[(r, j)])
                    .sum();
            }
            aug[i][p + i] = 1.0;
        }
        for c in 0..p {
            let piv = (c..p)
                .max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs()))
                .unwrap();
            aug.swap(c, piv);
            let d = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= d;
            }
            for r in 0..p {
                if r != c {
                    let f = aug[r][c];
                    for k in 0..2 * p {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        let mut out = DMatrix::zeros(targets.ncols(), p);
        for s in 0..targets.ncols() {
            for i in 0..p {
                out[(s, i)] = (0..p)
                    .map(|j| {
                        aug[i][p + j]
                            * (0..design.nrows())
                                .map(|r| design[(r, j)] * targets[(r, s)])
                                .sum::<f64>()
                    })
                    .sum();
            }
        }
        out
    }

    #[test]
    fn exact_linear_fit() {
        let design = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let targets = DMatrix::from_row_slice(3, 1, &[-2.0, -4.0, -6.0]);
        let a = ridge_solve(&design, &targets, 0.0).unwrap();
        assert!((a[(0, 0)] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 2.0, 1.0, 3.0, -1.0]);
        let targets = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let a = ridge_solve(&design, &targets, 1e14).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identity_design_halves() {
        let design = DMatrix::identity(4, 4);
        let mut targets = DMatrix::zeros(4, 1);
        targets[(0, 0)] = 1.0;
        let a = ridge_solve(&design, &targets, 1.0).unwrap();
        assert!((a[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(a[(0, 1)], 0.0);
    }

    #[test]
    fn singular_at_zero_lambda() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let targets = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            ridge_solve(&design, &targets, 0.0),
            Err(SindyError::RankDeficient { .. })
        ));
        assert!(ridge_solve(&design, &targets, 1e-3).is_ok());
    }

    #[test]
    fn recovers_linear_decay() {
        let field = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = -2.0 * x[0]);
        let traj = integrate(&field, &[1.5], &DMatrix::zeros(201, 0), 0.005, 201).unwrap();
        let lib = Arc::new(PolynomialLibrary::new(1, 2).unwrap());
        let config = StlsqConfig {
            threshold: 0.1,
            ..Default::default()
        };
        let result = stlsq_recover(&traj, lib, &config).unwrap();
        assert_eq!(result.coefficients.support(), vec![(0, 1)]);
        assert!((result.coefficients.get(0, 1) + 2.0).abs() < 1e-4);
        assert!(!result.empty_model());
    }

    #[test]
    fn zero_threshold_equals_ridge() {
        let sys = catalog_system("lotka").unwrap();
        let traj = sys.default_trajectory().unwrap();
        let lib = sys.library().clone();
        let config = StlsqConfig {
            threshold: 0.0,
            ..Default::default()
        };
        let result = stlsq_recover(&traj, lib.clone(), &config).unwrap();
        let derivs = finite_difference_derivatives(&traj).unwrap();
        let design = lib.evaluate(traj.states()).unwrap();
        let plain = ridge_solve(&design, &derivs, config.ridge_lambda).unwrap();
        assert_eq!(result.coefficients.values(), &plain);
        assert_eq!(result.sweeps_used, 1);
    }

    #[test]
    fn all_thresholded_sets_empty_flag() {
        let field = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = -0.01 * x[0]);
        let traj = integrate(&field, &[1.0], &DMatrix::zeros(50, 0), 0.1, 50).unwrap();
        let lib = Arc::new(PolynomialLibrary::new(1, 1).unwrap());
        let config = StlsqConfig {
            threshold: 1.0,
            ..Default::default()
        };
        let result = stlsq_recover(&traj, lib, &config).unwrap();
        assert!(result.empty_model());
        assert_eq!(result.empty_states, vec![0]);
    }

    #[test]
    fn rejects_bad_config() {
        let design = DMatrix::identity(2, 2);
        for config in [
            StlsqConfig {
                ridge_lambda: -1.0,
                ..Default::default()
            },
            StlsqConfig {
                threshold: f64::NAN,
                ..Default::default()
            },
            StlsqConfig {
                max_sweeps: 0,
                ..Default::default()
            },
        ] {
            assert!(stlsq_fit(&design, &design, &config).is_err());
        }
    }

    #[test]
    fn reconstruction_of_truth_is_tiny() {
        for name in ["lotka", "lorenz", "f8"] {
            let sys = catalog_system(name).unwrap();
            let traj = sys.default_trajectory().unwrap();
            let rec = reconstruction_error(&sys.true_coefficients, &traj).unwrap();
            assert!(rec.mse < 1e-8 && !rec.diverged, "{name}: {}", rec.mse);
        }
    }

    #[test]
    fn zero_model_on_decay() {
        let field = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = -x[0]);
        let traj = integrate(&field, &[1.0], &DMatrix::zeros(11, 0), 0.1, 11).unwrap();
        let zero = CoefficientMatrix::zeros(Arc::new(PolynomialLibrary::new(1, 1).unwrap()), 1);
        let rec = reconstruction_error(&zero, &traj).unwrap();
        // Oracle: the zero field holds x = 1, so the error is (x(t_i) - 1)^2.
        let expected: f64 = (0..11)
            .map(|i| ((-(i as f64) * 0.1).exp() - 1.0).powi(2))
            .sum::<f64>()
            / 11.0;
        assert!(
            (rec.mse - expected).abs() < 1e-6,
            "{} vs {expected}",
            rec.mse
        );
    }

    #[test]
    fn diverging_model_is_clipped() {
        let mut c = CoefficientMatrix::zeros(Arc::new(PolynomialLibrary::new(1, 2).unwrap()), 1);
        c.set_term(0, &[2], 5.0).unwrap();
        let field = FnField::new(1, 0, |_, _, _, dx: &mut [f64]| dx[0] = 0.0);
        let traj = integrate(&field, &[1.0], &DMatrix::zeros(100, 0), 0.1, 100).unwrap();
        let rec = reconstruction_error(&c, &traj).unwrap();
        assert!(rec.diverged);
        assert_eq!(rec.mse, DIVERGED_MSE);
    }

    fn small_problem() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
        (1usize..=4, 0usize..=4).prop_flat_map(|(p, extra)| {
            let n = p + extra.min(8 - p);
            (
                proptest::collection::vec(-2.0f64..2.0, n * p),
                proptest::collection::vec(-2.0f64..2.0, n),
            )
                .prop_map(move |(d, t)| {
                    (
                        DMatrix::from_row_slice(n, p, &d),
                        DMatrix::from_row_slice(n, 1, &t),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn matches_explicit_inverse((design, targets) in small_problem()) {
            let gram = design.tr_mul(&design);
            // Skip near-singular draws; the oracle is only meaningful when well conditioned.
            let svd = gram.clone().svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min();
            prop_assume!(cond.is_finite() && cond < 1e6);
            let fast = ridge_solve(&design, &targets, 0.0).unwrap();
            let slow = brute_force(&design, &targets);
            for (a, b) in fast.iter().zip(slow.iter()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }

        #[test]
        fn ridge_norm_shrinks(
            (design, targets) in small_problem(),
            l1 in 1e-4f64..1.0,
            factor in 1.0f64..100.0,
        ) {
            let a1 = ridge_solve(&design, &targets, l1).unwrap();
            let a2 = ridge_solve(&design, &targets, l1 * factor).unwrap();
            prop_assert!(a2.norm() <= a1.norm() * (1.0 + 1e-12));
        }

        #[test]
        fn support_is_monotone_and_permutation_equivariant(
            seed in 0u64..500,
            threshold in 0.05f64..0.6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (rows, p) = (30, 6);
            let design = DMatrix::from_fn(rows, p, |_, _| rng.random_range(-1.0..1.0));
            let truth = DMatrix::from_fn(p, 2, |_, _| if rng.random_bool(0.5) { rng.random_range(-2.0..2.0) } else { 0.0 });
            let noise = DMatrix::from_fn(rows, 2, |_, _| rng.random_range(-0.05..0.05));
            let targets = &design * &truth + noise;
            let config = StlsqConfig { threshold, ..Default::default() };
            let fit = stlsq_fit(&design, &targets, &config).unwrap();
            for pair in fit.support_history.windows(2) {
                prop_assert!(pair[1].iter().zip(&pair[0]).all(|(&after, &before)| !after || before));
            }

            let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
            let permuted = design.select_columns(perm.iter());
            let pfit = stlsq_fit(&permuted, &targets, &config).unwrap();
            for s in 0..2 {
                for (k, &j) in perm.iter().enumerate() {
                    let (a, b) = (fit.values[(s, j)], pfit.values[(s, k)]);
                    prop_assert_eq!(a == 0.0, b == 0.0);
                    prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
                }
            }
        }
    }
}
