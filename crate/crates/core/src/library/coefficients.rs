use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{LibraryError, PolynomialLibrary};
use crate::dynamics::VectorField;

/// `n_states x P` coefficients over a polynomial library: row `i` gives
/// `dx_i/dt` as a combination of library terms.
///
/// The support is always derived from the values, so it cannot drift from
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    library: Arc<PolynomialLibrary>,
    values: DMatrix<f64>,
}

impl CoefficientMatrix {
    pub fn zeros(library: Arc<PolynomialLibrary>, n_states: usize) -> Self {
        let p = library.len();
        Self {
            library,
            values: DMatrix::zeros(n_states, p),
        }
    }

    pub fn from_values(
        library: Arc<PolynomialLibrary>,
        values: DMatrix<f64>,
    ) -> Result<Self, LibraryError> {
        if values.ncols() != library.len() {
            return Err(LibraryError::Dimension(format!(
                "{} coefficient columns for a {}-term library",
                values.ncols(),
                library.len()
            )));
        }
        if values.nrows() == 0 || values.nrows() > library.n_vars() {
            return Err(LibraryError::Dimension(format!(
                "{} state rows for a library over {} variables",
                values.nrows(),
                library.n_vars()
            )));
        }
        Ok(Self { library, values })
    }

    /// Row-major flat coefficients (`state * P + term`).
    pub fn from_flat(
        library: Arc<PolynomialLibrary>,
        n_states: usize,
        flat: &[f64],
    ) -> Result<Self, LibraryError> {
        let p = library.len();
        if flat.len() != n_states * p {
            return Err(LibraryError::Dimension(format!(
                "{} flat coefficients, expected {}",
                flat.len(),
                n_states * p
            )));
        }
        Self::from_values(library, DMatrix::from_row_slice(n_states, p, flat))
    }

    pub fn library(&self) -> &Arc<PolynomialLibrary> {
        &self.library
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.values.nrows()
    }

    /// Library variables beyond the states are inputs.
    pub fn n_inputs(&self) -> usize {
        self.library.n_vars() - self.n_states()
    }

    pub fn n_terms(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, state: usize, term: usize) -> f64 {
        self.values[(state, term)]
    }

    pub fn set(&mut self, state: usize, term: usize, value: f64) {
        self.values[(state, term)] = value;
    }

    pub fn set_term(
        &mut self,
        state: usize,
        exponents: &[u32],
        value: f64,
    ) -> Result<(), LibraryError> {
        let term = self.library.index_of(exponents).ok_or_else(|| {
            LibraryError::Invalid(format!("monomial {exponents:?} not in library"))
        })?;
        if state >= self.n_states() {
            return Err(LibraryError::Dimension(format!(
                "state {state} out of range"
            )));
        }
        self.values[(state, term)] = value;
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.values.len());
        for i in 0..self.n_states() {
            flat.extend(self.values.row(i).iter());
        }
        flat
    }

    /// Nonzero `(state, term)` pairs in row-major order.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut support = Vec::new();
        for i in 0..self.n_states() {
            for j in 0..self.n_terms() {
                if self.values[(i, j)].abs() > 0.0 {
                    support.push((i, j));
                }
            }
        }
        support
    }

    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|v| v.abs() > 0.0).count()
    }

    /// Mean squared difference over all entries.
    pub fn mse(&self, other: &CoefficientMatrix) -> Result<f64, LibraryError> {
        if self.values.shape() != other.values.shape() {
            return Err(LibraryError::Dimension(format!(
                "coefficient shapes {:?} and {:?} differ",
                self.values.shape(),
                other.values.shape()
            )));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok(sum / self.values.len() as f64)
    }

    /// The vector field `dx/dt = values * phi(x, u)`.
    pub fn rhs_field(&self) -> PolynomialField<'_> {
        PolynomialField {
            coeffs: self,
            input_shift: vec![0.0; self.n_inputs()],
        }
    }

    /// As [`rhs_field`](Self::rhs_field), evaluating the library at
    /// `u + shift`.
    pub fn rhs_field_shifted(&self, shift: &[f64]) -> PolynomialField<'_> {
        assert_eq!(shift.len(), self.n_inputs(), "one shift per input");
        PolynomialField {
            coeffs: self,
            input_shift: shift.to_vec(),
        }
    }

    /// CSV with a header of monomial names, one row per state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), LibraryError> {
        writeln!(out, "{}", self.library.term_names().join(","))?;
        for i in 0..self.n_states() {
            let row: Vec<String> = self
                .values
                .row(i)
                .iter()
                .map(|v| crate::dynamics::trajectory_format(*v))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads a coefficient CSV against a known library; the header must list
    /// the library's terms in canonical order.
    pub fn read_csv<R: Read>(
        library: Arc<PolynomialLibrary>,
        input: R,
    ) -> Result<Self, LibraryError> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| LibraryError::Parse("empty coefficient file".into()))??;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names != library.term_names() {
            return Err(LibraryError::Parse(
                "header does not match the library's canonical terms".into(),
            ));
        }
        let mut flat = Vec::new();
        let mut rows = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values: Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| LibraryError::Parse(e.to_string()))?;
            if values.len() != library.len() {
                return Err(LibraryError::Parse(format!(
                    "row {} has {} values, expected {}",
                    rows + 1,
                    values.len(),
                    library.len()
                )));
            }
            flat.extend(values);
            rows += 1;
        }
        Self::from_flat(library, rows, &flat)
    }
}

/// Vector field backed by a [`CoefficientMatrix`].
pub struct PolynomialField<'a> {
    coeffs: &'a CoefficientMatrix,
    input_shift: Vec<f64>,
}

impl VectorField for PolynomialField<'_> {
    fn n_states(&self) -> usize {
        self.coeffs.n_states()
    }

    fn n_inputs(&self) -> usize {
        self.coeffs.n_inputs()
    }

    fn eval(&self, x: &[f64], u: &[f64], _t: f64, dx: &mut [f64]) {
        let lib = &self.coeffs.library;
        let mut point = Vec::with_capacity(lib.n_vars());
        point.extend_from_slice(x);
        point.extend(u.iter().zip(&self.input_shift).map(|(a, b)| a + b));
        let mut phi = vec![0.0; lib.len()];
        lib.evaluate_point(&point, &mut phi);
        for (i, d) in dx.iter_mut().enumerate() {
            *d = self
                .coeffs
                .values
                .row(i)
                .iter()
                .zip(&phi)
                .map(|(c, f)| c * f)
                .sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib(n: usize, m: usize) -> Arc<PolynomialLibrary> {
        Arc::new(PolynomialLibrary::new(n, m).unwrap())
    }

    #[test]
    fn zero_coefficients_give_zero_field() {
        let c = CoefficientMatrix::zeros(lib(2, 2), 2);
        let mut dx = [1.0, 1.0];
        c.rhs_field().eval(&[3.0, -4.0], &[], 0.0, &mut dx);
        assert_eq!(dx, [0.0, 0.0]);
        assert!(c.support().is_empty());
    }

    #[test]
    fn linear_decay_row() {
        let mut c = CoefficientMatrix::zeros(lib(1, 2), 1);
        c.set_term(0, &[1], -2.0).unwrap();
        let mut dx = [0.0];
        c.rhs_field().eval(&[3.0], &[], 0.0, &mut dx);
        assert_eq!(dx, [-6.0]);
        assert_eq!(c.support(), vec![(0, 1)]);
        assert_eq!(c.sparsity(), 1);
    }

    #[test]
    fn input_shift_applies_to_inputs_only() {
        let l = Arc::new(PolynomialLibrary::for_system(1, 1, 1).unwrap());
        let mut c = CoefficientMatrix::zeros(l, 1);
        c.set_term(0, &[0, 1], 2.0).unwrap();
        c.set_term(0, &[1, 0], 1.0).unwrap();
        let mut dx = [0.0];
        c.rhs_field_shifted(&[0.5])
            .eval(&[1.0], &[1.0], 0.0, &mut dx);
        assert_eq!(dx, [1.0 + 2.0 * 1.5]);
    }

    #[test]
    fn csv_round_trip() {
        let l = lib(3, 2);
        let mut c = CoefficientMatrix::zeros(l.clone(), 3);
        c.set_term(1, &[1, 0, 1], -1.0).unwrap();
        c.set_term(2, &[0, 0, 1], -8.0 / 3.0).unwrap();
        let text = c.to_csv_string();
        assert!(text.starts_with("1,x0,x1,x2,x0^2,x0*x1,x0*x2,x1^2,x1*x2,x2^2\n"));
        assert_eq!(CoefficientMatrix::read_csv(l, text.as_bytes()).unwrap(), c);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let text = "1,x0,x1\n0,1,2\n";
        assert!(CoefficientMatrix::read_csv(lib(3, 2), text.as_bytes()).is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(CoefficientMatrix::from_values(lib(2, 2), DMatrix::zeros(2, 5)).is_err());
        assert!(CoefficientMatrix::from_flat(lib(2, 2), 2, &[0.0; 11]).is_err());
        let mut c = CoefficientMatrix::zeros(lib(2, 2), 2);
        assert!(c.set_term(0, &[3, 0], 1.0).is_err());
    }
}
