//! Ground-truth constants for the benchmark catalog.
//!
//! These are repository constants. Recovery tests compare against the same
//! values used to simulate the data, so they never act as hidden ground truth.
//!
//! | system      | states | inputs | order | nonlinear terms |
//! |-------------|--------|--------|-------|-----------------|
//! | aid         | 3      | 1      | 2     | 1               |
//! | lorenz      | 3      | 0      | 2     | 2               |
//! | lotka       | 2      | 0      | 2     | 2               |
//! | pathogenic  | 5      | 1      | 3     | 5               |
//! | f8          | 3      | 1      | 3     | 8               |

/// Lorenz: `x' = s(y - x)`, `y' = x(r - z) - y`, `z' = xy - b z`.
pub mod lorenz {
    pub const SIGMA: f64 = 10.0;
    pub const RHO: f64 = 28.0;
    pub const BETA: f64 = 8.0 / 3.0;
    pub const X0: [f64; 3] = [-8.0, 7.0, 27.0];
    pub const DT: f64 = 0.01;
    pub const SAMPLES: usize = 1001;
    pub const SINDY_THRESHOLD: f64 = 0.1;
}

/// Lotka-Volterra: `x' = a x - b x y`, `y' = -c y + d x y`.
pub mod lotka {
    pub const A: f64 = 1.0;
    pub const B: f64 = 0.1;
    pub const C: f64 = 1.5;
    pub const D: f64 = 0.075;
    pub const X0: [f64; 2] = [10.0, 5.0];
    pub const DT: f64 = 0.05;
    pub const SAMPLES: usize = 401;
    pub const SINDY_THRESHOLD: f64 = 0.05;
}

/// F8 Crusader longitudinal dynamics (Garrard and Jordan), states angle of
/// attack, pitch angle and pitch rate, input tail deflection.
///
/// The state polynomial is the published model; the input enters through the
/// linear terms and the `x0^2 u` term of the pitch-rate equation only.
pub mod f8 {
    /// `x0'` terms: x0, x2, x0 x2, x0^2, x1^2, x0^2 x2, x0^3, u.
    pub const ALPHA_RATE: [f64; 8] = [-0.877, 1.0, -0.088, 0.47, -0.019, -1.0, 3.846, -0.215];
    /// `x2'` terms: x0, x2, x0^2, x0^3, u, x0^2 u.
    pub const PITCH_ACCEL: [f64; 6] = [-4.208, -0.396, -0.47, -3.564, -20.967, 6.265];
    pub const X0: [f64; 3] = [0.3, 0.0, 0.0];
    pub const DT: f64 = 0.01;
    pub const SAMPLES: usize = 1001;
    /// Tail deflection `u(t) = A (sin(w1 t) + sin(w2 t))`.
    pub const INPUT_AMPLITUDE: f64 = 0.05;
    pub const INPUT_FREQS: [f64; 2] = [1.0, 0.4];
    pub const SINDY_THRESHOLD: f64 = 0.01;
}

/// Pathogen / immune response with drug therapy.
///
/// States: pathogen, plasma cells, antibodies, organ damage, drug
/// concentration. Input: drug infusion rate.
///
/// ```text
/// x0' = G x0 - K x0 x2 - E x0 x4
/// x1' = P x0 x2 - P x0 x2 x3 - R x1 + S
/// x2' = x1 - x2 - Q x0 x2
/// x3' = W x0 - x3
/// x4' = -x4 + u
/// ```
pub mod pathogenic {
    pub const GROWTH: f64 = 1.0;
    pub const KILL: f64 = 1.0;
    pub const DRUG_KILL: f64 = 0.8;
    pub const PLASMA_GAIN: f64 = 0.8;
    pub const PLASMA_DECAY: f64 = 1.0;
    pub const PLASMA_SOURCE: f64 = 0.5;
    pub const ANTIBODY_BINDING: f64 = 0.2;
    pub const DAMAGE_GAIN: f64 = 0.5;
    pub const X0: [f64; 5] = [0.5, 0.5, 0.5, 0.0, 0.0];
    pub const DT: f64 = 0.05;
    pub const SAMPLES: usize = 401;
    /// Infusion `u(t) = OFFSET + AMPLITUDE sin(FREQ t)`.
    pub const INPUT_OFFSET: f64 = 0.5;
    pub const INPUT_AMPLITUDE: f64 = 0.5;
    pub const INPUT_FREQ: f64 = 0.7;
    pub const SINDY_THRESHOLD: f64 = 0.05;
}

/// Bergman minimal model of glucose-insulin dynamics.
///
/// Physical parameters (per minute): glucose effectiveness `P1`, insulin
/// action decay `P2`, insulin action gain `P3`, insulin clearance `N`, basal
/// glucose `GB` (mg/dL), basal insulin `IB` (mU/L), distribution volume `V1`
/// (L). States are rescaled to order one: `g = G/100`, `x = X/0.01`,
/// `i = I/10`; time stays in minutes and the input is insulin infusion above
/// basal in mU/min.
pub mod aid {
    pub const P1: f64 = 0.028735;
    pub const P2: f64 = 0.028344;
    pub const P3: f64 = 5.035e-5;
    pub const N: f64 = 0.0926;
    pub const GB: f64 = 81.0;
    pub const IB: f64 = 15.0;
    pub const V1: f64 = 12.0;

    pub const GLUCOSE_SCALE: f64 = 100.0;
    pub const ACTION_SCALE: f64 = 0.01;
    pub const INSULIN_SCALE: f64 = 10.0;

    pub const X0: [f64; 3] = [2.5, 0.0, 1.5];
    pub const DT: f64 = 1.0;
    pub const SAMPLES: usize = 200;
    /// Boluses of `BOLUS_RATE` mU/min over `[start, start + BOLUS_LENGTH)`.
    pub const BOLUS_RATE: f64 = 100.0;
    pub const BOLUS_STARTS: [f64; 2] = [10.0, 100.0];
    pub const BOLUS_LENGTH: f64 = 5.0;
    pub const SINDY_THRESHOLD: f64 = 1e-3;
}
