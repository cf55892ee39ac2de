use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;

use nalgebra::DMatrix;

use super::DynamicsError;

/// Relative tolerance on the uniform sampling step.
const STEP_TOLERANCE: f64 = 1e-12;

/// Uniformly sampled states and inputs.
///
/// `states` is `N x n`, `inputs` is `N x m` (with `m` possibly 0), and both
/// share the row index of `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: DMatrix<f64>,
        inputs: DMatrix<f64>,
    ) -> Result<Self, DynamicsError> {
        if times.len() < 2 {
            return Err(DynamicsError::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                times.len()
            )));
        }
        if states.nrows() != times.len() || inputs.nrows() != times.len() {
            return Err(DynamicsError::InvalidTrajectory(format!(
                "row counts differ: {} times, {} state rows, {} input rows",
                times.len(),
                states.nrows(),
                inputs.nrows()
            )));
        }
        if states.ncols() == 0 {
            return Err(DynamicsError::InvalidTrajectory(
                "trajectory has no state columns".into(),
            ));
        }
        let h = times[1] - times[0];
        if !(h > 0.0) || !h.is_finite() {
            return Err(DynamicsError::InvalidTrajectory(format!(
                "times must be strictly increasing (first step {h})"
            )));
        }
        // The tolerance scales with the magnitude of the timestamps so that
        // grids of the form t0 + i*h survive floating-point rounding.
        for (i, pair) in times.windows(2).enumerate() {
            let step = pair[1] - pair[0];
            let scale = h.max(pair[0].abs()).max(pair[1].abs());
            if (step - h).abs() > STEP_TOLERANCE * scale {
                return Err(DynamicsError::InvalidTrajectory(format!(
                    "non-uniform step at sample {}: {} vs {}",
                    i + 1,
                    step,
                    h
                )));
            }
        }
        Ok(Self {
            times,
            states,
            inputs,
        })
    }

    /// Builds a trajectory on the grid `t0 + i*h`.
    pub fn on_grid(
        t0: f64,
        h: f64,
        states: DMatrix<f64>,
        inputs: DMatrix<f64>,
    ) -> Result<Self, DynamicsError> {
        let times = (0..states.nrows()).map(|i| t0 + i as f64 * h).collect();
        Self::new(times, states, inputs)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.states.ncols()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    /// Sampling step.
    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn state_row(&self, i: usize) -> Vec<f64> {
        self.states.row(i).iter().copied().collect()
    }

    pub fn input_row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.state_row(0)
    }

    /// Contiguous sub-trajectory over the given sample range.
    pub fn slice(&self, range: Range<usize>) -> Result<Self, DynamicsError> {
        if range.end > self.len() || range.len() < 2 {
            return Err(DynamicsError::InvalidArgument(format!(
                "slice {range:?} invalid for trajectory of {} samples",
                self.len()
            )));
        }
        let rows = range.len();
        Ok(Self {
            times: self.times[range.clone()].to_vec(),
            states: self.states.rows(range.start, rows).into_owned(),
            inputs: self.inputs.rows(range.start, rows).into_owned(),
        })
    }

    pub(crate) fn with_states(&self, states: DMatrix<f64>) -> Self {
        debug_assert_eq!(states.shape(), self.states.shape());
        Self {
            times: self.times.clone(),
            states,
            inputs: self.inputs.clone(),
        }
    }

    /// Writes `t,x0..x{n-1},u0..u{m-1}` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DynamicsError> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_states()).map(|i| format!("x{i}")));
        header.extend((0..self.n_inputs()).map(|i| format!("u{i}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut line = format_f64(self.times[i]);
            for v in self.states.row(i).iter().chain(self.inputs.row(i).iter()) {
                line.push(',');
                line.push_str(&format_f64(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DynamicsError> {
        let mut lines = BufReader::new(input).lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(DynamicsError::Csv("empty file".into())),
        };
        let columns: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if columns.first() != Some(&"t") {
            return Err(DynamicsError::Csv("first column must be 't'".into()));
        }
        let n = count_prefixed(&columns[1..], 'x')?;
        let m = count_prefixed(&columns[1 + n..], 'u')?;
        if 1 + n + m != columns.len() {
            return Err(DynamicsError::Csv(format!(
                "unexpected columns in header '{header}'"
            )));
        }

        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(DynamicsError::Csv(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    columns.len(),
                    fields.len()
                )));
            }
            let mut parsed = fields.iter().map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    DynamicsError::Csv(format!("line {}: '{}': {e}", lineno + 2, f.trim()))
                })
            });
            times.push(parsed.next().unwrap()?);
            for v in parsed {
                values.push(v?);
            }
        }
        let rows = times.len();
        let width = n + m;
        let states = DMatrix::from_fn(rows, n, |i, j| values[i * width + j]);
        let inputs = DMatrix::from_fn(rows, m, |i, j| values[i * width + n + j]);
        Self::new(times, states, inputs)
    }
}

fn count_prefixed(columns: &[&str], prefix: char) -> Result<usize, DynamicsError> {
    let mut count = 0;
    for col in columns {
        match col.strip_prefix(prefix) {
            Some(idx) if idx.parse::<usize>().ok() == Some(count) => count += 1,
            Some(_) => return Err(DynamicsError::Csv(format!("column '{col}' out of order"))),
            None => break,
        }
    }
    Ok(count)
}

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
