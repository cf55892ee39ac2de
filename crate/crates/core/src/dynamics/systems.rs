use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::constants::{aid, f8, lorenz, lotka, pathogenic};
use super::{integrate, DynamicsError, Trajectory, VectorField};
use crate::library::{CoefficientMatrix, PolynomialLibrary};

pub const CATALOG_NAMES: [&str; 5] = ["aid", "lotka", "lorenz", "pathogenic", "f8"];

type Rhs = fn(&[f64], &[f64], &mut [f64]);
type InputSignal = fn(f64, &mut [f64]);

/// A catalog benchmark system with its ground truth and simulation defaults.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: &'static str,
    /// Display label ("Lotka", "F8", ...).
    pub label: &'static str,
    pub n_states: usize,
    pub n_inputs: usize,
    pub library_order: usize,
    pub true_coefficients: CoefficientMatrix,
    pub nonlinear_term_count: usize,
    pub default_dt: f64,
    pub default_samples: usize,
    pub default_x0: Vec<f64>,
    /// Suggested absolute STLSQ threshold for this system's coefficient scale.
    pub sindy_threshold: f64,
    rhs: Rhs,
    input_signal: InputSignal,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("n_states", &self.n_states)
            .field("n_inputs", &self.n_inputs)
            .field("library_order", &self.library_order)
            .field("nonlinear_term_count", &self.nonlinear_term_count)
            .finish_non_exhaustive()
    }
}

impl VectorField for SystemSpec {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn eval(&self, x: &[f64], u: &[f64], _t: f64, dx: &mut [f64]) {
        (self.rhs)(x, u, dx)
    }
}

impl SystemSpec {
    pub fn library(&self) -> &Arc<PolynomialLibrary> {
        self.true_coefficients.library()
    }

    /// Default forcing sampled on the grid `i * dt`, one row per sample.
    pub fn input_signal(&self, dt: f64, n_samples: usize) -> DMatrix<f64> {
        let mut inputs = DMatrix::zeros(n_samples, self.n_inputs);
        let mut u = vec![0.0; self.n_inputs];
        for i in 0..n_samples {
            (self.input_signal)(i as f64 * dt, &mut u);
            inputs.row_mut(i).copy_from_slice(&u);
        }
        inputs
    }

    /// Simulates from the default initial state with the default forcing.
    pub fn simulate(&self, dt: f64, n_samples: usize) -> Result<Trajectory, DynamicsError> {
        self.simulate_from(&self.default_x0, dt, n_samples)
    }

    pub fn simulate_from(
        &self,
        x0: &[f64],
        dt: f64,
        n_samples: usize,
    ) -> Result<Trajectory, DynamicsError> {
        let inputs = self.input_signal(dt, n_samples);
        integrate(self, x0, &inputs, dt, n_samples)
    }

    /// Simulation with all catalog defaults.
    pub fn default_trajectory(&self) -> Result<Trajectory, DynamicsError> {
        self.simulate(self.default_dt, self.default_samples)
    }
}

/// Looks up a catalog system by (case-insensitive) name.
pub fn catalog_system(name: &str) -> Result<SystemSpec, DynamicsError> {
    match name.to_ascii_lowercase().as_str() {
        "aid" => Ok(aid_system()),
        "lotka" => Ok(lotka_system()),
        "lorenz" => Ok(lorenz_system()),
        "pathogenic" => Ok(pathogenic_system()),
        "f8" => Ok(f8_system()),
        _ => Err(DynamicsError::UnknownSystem {
            name: name.to_string(),
            valid: CATALOG_NAMES.join(", "),
        }),
    }
}

fn coefficients(
    n_states: usize,
    n_inputs: usize,
    order: usize,
    terms: &[(usize, &[u32], f64)],
) -> CoefficientMatrix {
    let library = PolynomialLibrary::for_system(n_states, n_inputs, order)
        .expect("catalog libraries are small");
    let mut coeffs = CoefficientMatrix::zeros(Arc::new(library), n_states);
    for &(state, exponents, value) in terms {
        coeffs
            .set_term(state, exponents, value)
            .expect("catalog terms exist in the library");
    }
    coeffs
}

fn lorenz_system() -> SystemSpec {
    use lorenz::*;
    let true_coefficients = coefficients(
        3,
        0,
        2,
        &[
            (0, &[1, 0, 0], -SIGMA),
            (0, &[0, 1, 0], SIGMA),
            (1, &[1, 0, 0], RHO),
            (1, &[0, 1, 0], -1.0),
            (1, &[1, 0, 1], -1.0),
            (2, &[1, 1, 0], 1.0),
            (2, &[0, 0, 1], -BETA),
        ],
    );
    SystemSpec {
        name: "lorenz",
        label: "Lorenz",
        n_states: 3,
        n_inputs: 0,
        library_order: 2,
        true_coefficients,
        nonlinear_term_count: 2,
        default_dt: DT,
        default_samples: SAMPLES,
        default_x0: X0.to_vec(),
        sindy_threshold: SINDY_THRESHOLD,
        rhs: |x, _, dx| {
            dx[0] = SIGMA * (x[1] - x[0]);
            dx[1] = x[0] * (RHO - x[2]) - x[1];
            dx[2] = x[0] * x[1] - BETA * x[2];
        },
        input_signal: |_, _| {},
    }
}

fn lotka_system() -> SystemSpec {
    use lotka::*;
    let true_coefficients = coefficients(
        2,
        0,
        2,
        &[
            (0, &[1, 0], A),
            (0, &[1, 1], -B),
            (1, &[0, 1], -C),
            (1, &[1, 1], D),
        ],
    );
    SystemSpec {
        name: "lotka",
        label: "Lotka",
        n_states: 2,
        n_inputs: 0,
        library_order: 2,
        true_coefficients,
        nonlinear_term_count: 2,
        default_dt: DT,
        default_samples: SAMPLES,
        default_x0: X0.to_vec(),
        sindy_threshold: SINDY_THRESHOLD,
        rhs: |x, _, dx| {
            dx[0] = A * x[0] - B * x[0] * x[1];
            dx[1] = -C * x[1] + D * x[0] * x[1];
        },
        input_signal: |_, _| {},
    }
}

fn f8_system() -> SystemSpec {
    use f8::*;
    let a = ALPHA_RATE;
    let q = PITCH_ACCEL;
    // Variable order: x0, x1, x2, u0.
    let true_coefficients = coefficients(
        3,
        1,
        3,
        &[
            (0, &[1, 0, 0, 0], a[0]),
            (0, &[0, 0, 1, 0], a[1]),
            (0, &[1, 0, 1, 0], a[2]),
            (0, &[2, 0, 0, 0], a[3]),
            (0, &[0, 2, 0, 0], a[4]),
            (0, &[2, 0, 1, 0], a[5]),
            (0, &[3, 0, 0, 0], a[6]),
            (0, &[0, 0, 0, 1], a[7]),
            (1, &[0, 0, 1, 0], 1.0),
            (2, &[1, 0, 0, 0], q[0]),
            (2, &[0, 0, 1, 0], q[1]),
            (2, &[2, 0, 0, 0], q[2]),
            (2, &[3, 0, 0, 0], q[3]),
            (2, &[0, 0, 0, 1], q[4]),
            (2, &[2, 0, 0, 1], q[5]),
        ],
    );
    SystemSpec {
        name: "f8",
        label: "F8",
        n_states: 3,
        n_inputs: 1,
        library_order: 3,
        true_coefficients,
        nonlinear_term_count: 8,
        default_dt: DT,
        default_samples: SAMPLES,
        default_x0: X0.to_vec(),
        sindy_threshold: SINDY_THRESHOLD,
        rhs: |x, u, dx| {
            let (a, q) = (ALPHA_RATE, PITCH_ACCEL);
            let (x0, x1, x2, u) = (x[0], x[1], x[2], u[0]);
            dx[0] = a[0] * x0
                + a[1] * x2
                + a[2] * x0 * x2
                + a[3] * x0 * x0
                + a[4] * x1 * x1
                + a[5] * x0 * x0 * x2
                + a[6] * x0 * x0 * x0
                + a[7] * u;
            dx[1] = x2;
            dx[2] = q[0] * x0
                + q[1] * x2
                + q[2] * x0 * x0
                + q[3] * x0 * x0 * x0
                + q[4] * u
                + q[5] * x0 * x0 * u;
        },
        input_signal: |t, u| {
            u[0] = INPUT_AMPLITUDE * ((INPUT_FREQS[0] * t).sin() + (INPUT_FREQS[1] * t).sin());
        },
    }
}

fn pathogenic_system() -> SystemSpec {
    use pathogenic::*;
    // Variable order: x0..x4, u0.
    let true_coefficients = coefficients(
        5,
        1,
        3,
        &[
            (0, &[1, 0, 0, 0, 0, 0], GROWTH),
            (0, &[1, 0, 1, 0, 0, 0], -KILL),
            (0, &[1, 0, 0, 0, 1, 0], -DRUG_KILL),
            (1, &[1, 0, 1, 0, 0, 0], PLASMA_GAIN),
            (1, &[1, 0, 1, 1, 0, 0], -PLASMA_GAIN),
            (1, &[0, 1, 0, 0, 0, 0], -PLASMA_DECAY),
            (1, &[0, 0, 0, 0, 0, 0], PLASMA_SOURCE),
            (2, &[0, 1, 0, 0, 0, 0], 1.0),
            (2, &[0, 0, 1, 0, 0, 0], -1.0),
            (2, &[1, 0, 1, 0, 0, 0], -ANTIBODY_BINDING),
            (3, &[1, 0, 0, 0, 0, 0], DAMAGE_GAIN),
            (3, &[0, 0, 0, 1, 0, 0], -1.0),
            (4, &[0, 0, 0, 0, 1, 0], -1.0),
            (4, &[0, 0, 0, 0, 0, 1], 1.0),
        ],
    );
    SystemSpec {
        name: "pathogenic",
        label: "Pathogenic",
        n_states: 5,
        n_inputs: 1,
        library_order: 3,
        true_coefficients,
        nonlinear_term_count: 5,
        default_dt: DT,
        default_samples: SAMPLES,
        default_x0: X0.to_vec(),
        sindy_threshold: SINDY_THRESHOLD,
        rhs: |x, u, dx| {
            dx[0] = GROWTH * x[0] - KILL * x[0] * x[2] - DRUG_KILL * x[0] * x[4];
            dx[1] = PLASMA_GAIN * x[0] * x[2] * (1.0 - x[3]) - PLASMA_DECAY * x[1] + PLASMA_SOURCE;
            dx[2] = x[1] - x[2] - ANTIBODY_BINDING * x[0] * x[2];
            dx[3] = DAMAGE_GAIN * x[0] - x[3];
            dx[4] = -x[4] + u[0];
        },
        input_signal: |t, u| {
            u[0] = INPUT_OFFSET + INPUT_AMPLITUDE * (INPUT_FREQ * t).sin();
        },
    }
}

fn aid_system() -> SystemSpec {
    use aid::*;
    let basal_glucose = P1 * GB / GLUCOSE_SCALE;
    let action_gain = P3 * INSULIN_SCALE / ACTION_SCALE;
    let action_offset = -P3 * IB / ACTION_SCALE;
    let insulin_source = N * IB / INSULIN_SCALE;
    let infusion_gain = 1.0 / (V1 * INSULIN_SCALE);
    // Variable order: g, x, i, u.
    let true_coefficients = coefficients(
        3,
        1,
        2,
        &[
            (0, &[0, 0, 0, 0], basal_glucose),
            (0, &[1, 0, 0, 0], -P1),
            (0, &[1, 1, 0, 0], -ACTION_SCALE),
            (1, &[0, 0, 0, 0], action_offset),
            (1, &[0, 1, 0, 0], -P2),
            (1, &[0, 0, 1, 0], action_gain),
            (2, &[0, 0, 0, 0], insulin_source),
            (2, &[0, 0, 1, 0], -N),
            (2, &[0, 0, 0, 1], infusion_gain),
        ],
    );
    SystemSpec {
        name: "aid",
        label: "AID",
        n_states: 3,
        n_inputs: 1,
        library_order: 2,
        true_coefficients,
        nonlinear_term_count: 1,
        default_dt: DT,
        default_samples: SAMPLES,
        default_x0: X0.to_vec(),
        sindy_threshold: SINDY_THRESHOLD,
        rhs: |x, u, dx| {
            // Physical units, then rescaled.
            let glucose = x[0] * GLUCOSE_SCALE;
            let action = x[1] * ACTION_SCALE;
            let insulin = x[2] * INSULIN_SCALE;
            let d_glucose = -(P1 + action) * glucose + P1 * GB;
            let d_action = -P2 * action + P3 * (insulin - IB);
            let d_insulin = -N * (insulin - IB) + u[0] / V1;
            dx[0] = d_glucose / GLUCOSE_SCALE;
            dx[1] = d_action / ACTION_SCALE;
            dx[2] = d_insulin / INSULIN_SCALE;
        },
        input_signal: |t, u| {
            let on = BOLUS_STARTS
                .iter()
                .any(|&start| t >= start && t < start + BOLUS_LENGTH);
            u[0] = if on { BOLUS_RATE } else { 0.0 };
        },
    }
}
