use nalgebra::DMatrix;
use rayon::prelude::*;

use super::LibraryError;

/// Upper bound on library size.
pub const MAX_LIBRARY_TERMS: usize = 100_000;

/// `C(n, k)` with overflow checking.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Monomials of total degree `<= max_order` over `n_vars` variables.
///
/// Terms are ordered by total degree and, within a degree, lexicographically
/// by the sorted list of variable indices they multiply: for three variables
/// and order two the order is `1, x0, x1, x2, x0^2, x0*x1, x0*x2, x1^2,
/// x1*x2, x2^2`. This order is part of the on-disk format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialLibrary {
    max_order: usize,
    var_names: Vec<String>,
    terms: Vec<Vec<u32>>,
    // Nonzero (variable, exponent) pairs per term.
    factors: Vec<Vec<(usize, u32)>>,
}

impl PolynomialLibrary {
    /// Library over `x0..x{n_vars-1}`.
    pub fn new(n_vars: usize, max_order: usize) -> Result<Self, LibraryError> {
        let names = (0..n_vars).map(|i| format!("x{i}")).collect();
        Self::with_names(names, max_order)
    }

    /// Library over states `x0..` followed by inputs `u0..`.
    pub fn for_system(
        n_states: usize,
        n_inputs: usize,
        max_order: usize,
    ) -> Result<Self, LibraryError> {
        let names = (0..n_states)
            .map(|i| format!("x{i}"))
            .chain((0..n_inputs).map(|i| format!("u{i}")))
            .collect();
        Self::with_names(names, max_order)
    }

    pub fn with_names(var_names: Vec<String>, max_order: usize) -> Result<Self, LibraryError> {
        let n_vars = var_names.len();
        if n_vars == 0 {
            return Err(LibraryError::Invalid("need at least one variable".into()));
        }
        if max_order == 0 {
            return Err(LibraryError::Invalid("max order must be at least 1".into()));
        }
        let count = binomial((max_order + n_vars) as u64, n_vars as u64);
        match count {
            Some(c) if c <= MAX_LIBRARY_TERMS as u128 => {}
            other => {
                return Err(LibraryError::TooLarge {
                    n_vars,
                    max_order,
                    terms: other.unwrap_or(u128::MAX),
                    limit: MAX_LIBRARY_TERMS,
                })
            }
        }

        let mut terms = Vec::with_capacity(count.unwrap() as usize);
        let mut combo: Vec<usize> = Vec::with_capacity(max_order);
        for degree in 0..=max_order {
            combo.clear();
            combo.resize(degree, 0);
            loop {
                let mut exps = vec![0u32; n_vars];
                for &v in &combo {
                    exps[v] += 1;
                }
                terms.push(exps);
                if !next_multiset(&mut combo, n_vars) {
                    break;
                }
            }
        }
        let factors = terms
            .iter()
            .map(|t| {
                t.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e))
                    .collect()
            })
            .collect();
        Ok(Self {
            max_order,
            var_names,
            terms,
            factors,
        })
    }

    /// Rebuilds a library from an exported term list, checking it is the
    /// canonical list for its size.
    pub fn from_terms(terms: Vec<Vec<u32>>) -> Result<Self, LibraryError> {
        let n_vars = terms.first().map(Vec::len).unwrap_or(0);
        let max_order = terms
            .iter()
            .map(|t| t.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0);
        let lib = Self::new(n_vars, max_order)?;
        if lib.terms != terms {
            return Err(LibraryError::Invalid(
                "term list is not in canonical order".into(),
            ));
        }
        Ok(lib)
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn degree(&self, term: usize) -> usize {
        self.terms[term].iter().sum::<u32>() as usize
    }

    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t.as_slice() == exponents)
    }

    /// Human-readable monomial: `1`, `x0`, `x0*x1`, `x2^2`.
    pub fn term_name(&self, term: usize) -> String {
        let factors = &self.factors[term];
        if factors.is_empty() {
            return "1".to_string();
        }
        factors
            .iter()
            .map(|&(v, e)| {
                if e == 1 {
                    self.var_names[v].clone()
                } else {
                    format!("{}^{}", self.var_names[v], e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    pub fn term_names(&self) -> Vec<String> {
        (0..self.len()).map(|j| self.term_name(j)).collect()
    }

    /// Evaluates every monomial at one point.
    pub fn evaluate_point(&self, point: &[f64], out: &mut [f64]) {
        debug_assert_eq!(point.len(), self.n_vars());
        debug_assert_eq!(out.len(), self.len());
        let table = self.power_table(point);
        let stride = self.max_order + 1;
        for (slot, factors) in out.iter_mut().zip(&self.factors) {
            let mut value = 1.0;
            for &(v, e) in factors {
                value *= table[v * stride + e as usize];
            }
            *slot = value;
        }
    }

    /// Evaluates the library at each row of `points`, giving an `N x P`
    /// design matrix.
    pub fn evaluate(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>, LibraryError> {
        if points.ncols() != self.n_vars() {
            return Err(LibraryError::Dimension(format!(
                "points have {} columns, library has {} variables",
                points.ncols(),
                self.n_vars()
            )));
        }
        let p = self.len();
        let rows: Vec<Vec<f64>> = (0..points.nrows())
            .into_par_iter()
            .map(|i| {
                let point: Vec<f64> = points.row(i).iter().copied().collect();
                let mut row = vec![0.0; p];
                self.evaluate_point(&point, &mut row);
                row
            })
            .collect();
        Ok(DMatrix::from_fn(points.nrows(), p, |i, j| rows[i][j]))
    }

    /// Vector-Jacobian product: `out[v] = sum_j weights[j] * d(phi_j)/d(z_v)`.
    pub fn gradient_dot(&self, point: &[f64], weights: &[f64], out: &mut [f64]) {
        debug_assert_eq!(weights.len(), self.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        let table = self.power_table(point);
        let stride = self.max_order + 1;
        for (&w, factors) in weights.iter().zip(&self.factors) {
            if w == 0.0 {
                continue;
            }
            for (k, &(v, e)) in factors.iter().enumerate() {
                let mut d = e as f64 * table[v * stride + e as usize - 1];
                for (k2, &(v2, e2)) in factors.iter().enumerate() {
                    if k2 != k {
                        d *= table[v2 * stride + e2 as usize];
                    }
                }
                out[v] += w * d;
            }
        }
    }

    fn power_table(&self, point: &[f64]) -> Vec<f64> {
        let stride = self.max_order + 1;
        let mut table = vec![1.0; point.len() * stride];
        for (v, &z) in point.iter().enumerate() {
            for e in 1..stride {
                table[v * stride + e] = table[v * stride + e - 1] * z;
            }
        }
        table
    }

    /// Term list as a JSON array of exponent vectors.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.terms).expect("exponent vectors serialize")
    }

    pub fn from_json(json: &str) -> Result<Self, LibraryError> {
        let terms: Vec<Vec<u32>> =
            serde_json::from_str(json).map_err(|e| LibraryError::Parse(e.to_string()))?;
        Self::from_terms(terms)
    }
}

// Advances a non-decreasing index sequence to the next multiset in lex order.
fn next_multiset(combo: &mut [usize], n_vars: usize) -> bool {
    let Some(i) = combo.iter().rposition(|&c| c + 1 < n_vars) else {
        return false;
    };
    let next = combo[i] + 1;
    for c in &mut combo[i..] {
        *c = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pascal(n: usize, k: usize) -> u128 {
        let mut rows = vec![vec![1u128]];
        for i in 1..=n {
            let prev = &rows[i - 1];
            let mut row = vec![1u128; i + 1];
            for j in 1..i {
                row[j] = prev[j - 1] + prev[j];
            }
            rows.push(row);
        }
        rows[n][k]
    }

    #[test]
    fn sizing_matches_pascal_triangle() {
        for n in 1..=6 {
            for m in 1..=4 {
                let lib = PolynomialLibrary::new(n, m).unwrap();
                assert_eq!(lib.len() as u128, pascal(n + m, n), "n={n} M={m}");
            }
        }
    }

    #[test]
    fn three_vars_order_two_canonical() {
        let lib = PolynomialLibrary::new(3, 2).unwrap();
        assert_eq!(
            lib.term_names(),
            ["1", "x0", "x1", "x2", "x0^2", "x0*x1", "x0*x2", "x1^2", "x1*x2", "x2^2"]
        );
    }

    #[test]
    fn small_libraries() {
        assert_eq!(PolynomialLibrary::new(2, 2).unwrap().len(), 6);
        let one = PolynomialLibrary::new(1, 3).unwrap();
        assert_eq!(one.term_names(), ["1", "x0", "x0^2", "x0^3"]);
    }

    #[test]
    fn rejects_degenerate_and_huge() {
        assert!(PolynomialLibrary::new(0, 2).is_err());
        assert!(PolynomialLibrary::new(2, 0).is_err());
        assert!(matches!(
            PolynomialLibrary::new(20, 10),
            Err(LibraryError::TooLarge { .. })
        ));
    }

    #[test]
    fn evaluate_hand_values() {
        let lib = PolynomialLibrary::new(2, 2).unwrap();
        let pts = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 0.0, 0.0]);
        let design = lib.evaluate(&pts).unwrap();
        assert_eq!(
            design.row(0).iter().copied().collect::<Vec<_>>(),
            [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
        assert_eq!(
            design.row(1).iter().copied().collect::<Vec<_>>(),
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let lin = PolynomialLibrary::new(1, 1).unwrap();
        let row = lin
            .evaluate(&DMatrix::from_row_slice(1, 1, &[-1.5]))
            .unwrap();
        assert_eq!(row.as_slice(), &[1.0, -1.5]);
    }

    #[test]
    fn evaluate_checks_columns() {
        let lib = PolynomialLibrary::new(2, 2).unwrap();
        assert!(lib.evaluate(&DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn non_finite_propagates() {
        let lib = PolynomialLibrary::new(2, 2).unwrap();
        let mut out = vec![0.0; 6];
        lib.evaluate_point(&[f64::NAN, 1.0], &mut out);
        assert_eq!(out[0], 1.0);
        assert!(out[1].is_nan());
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn system_names_and_index() {
        let lib = PolynomialLibrary::for_system(2, 1, 2).unwrap();
        assert_eq!(lib.term_name(9), "u0^2");
        assert_eq!(
            lib.index_of(&[1, 0, 1]),
            Some(lib.term_names().iter().position(|n| n == "x0*u0").unwrap())
        );
    }

    #[test]
    fn json_round_trip_and_canonical_check() {
        let lib = PolynomialLibrary::new(3, 2).unwrap();
        let json = lib.to_json();
        assert!(json.starts_with("[[0,0,0],[1,0,0],[0,1,0]"));
        assert_eq!(PolynomialLibrary::from_json(&json).unwrap(), lib);
        assert!(PolynomialLibrary::from_json("[[0,0],[0,1],[1,0]]").is_err());
    }

    #[test]
    fn binomial_overflow_is_none() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(2, 5), Some(0));
        assert!(binomial(300, 150).is_none());
    }

    #[test]
    fn gradient_dot_matches_finite_differences() {
        let lib = PolynomialLibrary::new(3, 3).unwrap();
        let point = [0.7, -1.3, 0.4];
        let weights: Vec<f64> = (0..lib.len()).map(|j| ((j * 7 % 5) as f64) - 2.0).collect();
        let mut grad = vec![0.0; 3];
        lib.gradient_dot(&point, &weights, &mut grad);
        let f = |p: &[f64]| {
            let mut row = vec![0.0; lib.len()];
            lib.evaluate_point(p, &mut row);
            row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        for v in 0..3 {
            let eps = 1e-6;
            let mut hi = point;
            let mut lo = point;
            hi[v] += eps;
            lo[v] -= eps;
            let fd = (f(&hi) - f(&lo)) / (2.0 * eps);
            assert!((fd - grad[v]).abs() < 1e-7, "var {v}: {fd} vs {}", grad[v]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ordering_and_uniqueness(n in 1usize..=5, m in 1usize..=4) {
            let lib = PolynomialLibrary::new(n, m).unwrap();
            prop_assert!(lib.terms()[0].iter().all(|&e| e == 0));
            let mut seen = std::collections::HashSet::new();
            for j in 0..lib.len() {
                prop_assert!(seen.insert(lib.terms()[j].clone()));
                if j > 0 {
                    prop_assert!(lib.degree(j) >= lib.degree(j - 1));
                }
            }
        }

        #[test]
        fn evaluation_matches_naive_pow(
            point in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let lib = PolynomialLibrary::new(4, 4).unwrap();
            let mut fast = vec![0.0; lib.len()];
            lib.evaluate_point(&point, &mut fast);
            for (j, term) in lib.terms().iter().enumerate() {
                let naive: f64 = term.iter().zip(&point).map(|(&e, &z)| z.powi(e as i32)).product();
                let scale = naive.abs().max(1e-300);
                prop_assert!((fast[j] - naive).abs() / scale < 1e-13 || (fast[j] - naive).abs() < 1e-300);
            }
        }
    }
}
