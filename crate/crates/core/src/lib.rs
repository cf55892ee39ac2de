//! Sparse nonlinear model recovery from multivariate time series with
//! exogenous inputs.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: benchmark systems, fixed-step RK4 integration and
//!   trajectory generation (plus the embedded Hudson Bay pelt series).
//! - [`library`]: polynomial feature libraries, coefficient matrices and
//!   finite-difference derivative estimates.
//! - [`sindy`]: ridge regression with sequential thresholding (STLSQ).
//! - [`merinda`]: GRU + dense-head recovery trained through an unrolled,
//!   differentiable RK4 solve.
//! - [`cost`]: analytic memory and energy models and the exchange sweep.
//! - [`harness`]: the pieces behind the `merinda` binary (reports,
//!   benchmark suite, cost scans, config files).

// Index loops mirror the math, and `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dynamics;
pub mod harness;
pub mod library;
pub mod merinda;
pub mod sindy;

pub use dynamics::{
    catalog_system, hudson_bay_dataset, integrate, rk4_step, DynamicsError, NoiseSpec, SystemSpec,
    Trajectory, VectorField,
};
pub use library::{CoefficientMatrix, LibraryError, PolynomialLibrary};
