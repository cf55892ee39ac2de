//! Polynomial feature libraries and the coefficient matrices defined over
//! them.

mod coefficients;
mod derivatives;
mod polynomial;

pub use coefficients::{CoefficientMatrix, PolynomialField};
pub use derivatives::finite_difference_derivatives;
pub use polynomial::{binomial, PolynomialLibrary, MAX_LIBRARY_TERMS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("library with C({}, {}) = {terms} terms exceeds the limit of {limit}", .n_vars + .max_order, .n_vars)]
    TooLarge {
        n_vars: usize,
        max_order: usize,
        terms: u128,
        limit: usize,
    },
    #[error("invalid library: {0}")]
    Invalid(String),
    #[error("trajectory too short for derivatives: {0} samples, need at least 3")]
    TooShort(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
