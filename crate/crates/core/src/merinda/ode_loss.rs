//! ODE loss: integrate the candidate model from the window's first observed
//! state with fixed-step RK4 and compare against the observations.
//!
//! The backward pass differentiates the discrete solver itself (every RK4
//! stage of every step), so gradients are exact for the computation the
//! forward pass performs.

use crate::dynamics::{Trajectory, DIVERGENCE_GUARD};
use crate::library::{CoefficientMatrix, PolynomialLibrary};

/// Loss assigned to a window whose integration diverged.
pub const DIVERGED_LOSS: f64 = 1e12;

/// One observation window in row-major layout.
#[derive(Debug, Clone, Copy)]
pub struct WindowData<'a> {
    /// `k x n` observed states.
    pub states: &'a [f64],
    /// `k x m` inputs, held over each sample interval.
    pub inputs: &'a [f64],
    pub n_states: usize,
    pub n_inputs: usize,
    /// Sample spacing.
    pub step: f64,
    /// RK4 steps per sample interval.
    pub substeps: usize,
}

impl WindowData<'_> {
    pub fn len(&self) -> usize {
        self.states.len() / self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub diverged: bool,
}

/// Loss and its gradient w.r.t. the flat coefficients and the input shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub value: LossValue,
    /// Row-major `n x P`.
    pub d_theta: Vec<f64>,
    pub d_shifts: Vec<f64>,
}

// RK4 stage record for one solver step.
struct StepTape {
    // Library inputs [state; u + shift] at each of the four stages.
    points: [Vec<f64>; 4],
    // Library values at each stage.
    phis: [Vec<f64>; 4],
}

struct Forward {
    predicted: Vec<f64>,
    tapes: Vec<StepTape>,
    diverged: bool,
}

fn forward(
    library: &PolynomialLibrary,
    theta: &[f64],
    shifts: &[f64],
    window: &WindowData<'_>,
    record: bool,
) -> Forward {
    let n = window.n_states;
    let m = window.n_inputs;
    let p = library.len();
    let k = window.len();
    let substeps = window.substeps.max(1);
    let h = window.step / substeps as f64;

    let mut predicted = vec![0.0; k * n];
    predicted[..n].copy_from_slice(&window.states[..n]);
    let mut tapes = Vec::with_capacity(if record { (k - 1) * substeps } else { 0 });
    let mut y = window.states[..n].to_vec();
    let mut point = vec![0.0; n + m];
    let mut phi = vec![0.0; p];
    let mut ks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for j in 0..k - 1 {
        for (slot, (u, s)) in point[n..]
            .iter_mut()
            .zip(window.inputs[j * m..(j + 1) * m].iter().zip(shifts))
        {
            *slot = u + s;
        }
        for _ in 0..substeps {
            let mut tape_points: [Vec<f64>; 4] = Default::default();
            let mut tape_phis: [Vec<f64>; 4] = Default::default();
            for stage in 0..4 {
                let (base, scale) = match stage {
                    0 => (None, 0.0),
                    1 => (Some(0), 0.5 * h),
                    2 => (Some(1), 0.5 * h),
                    _ => (Some(2), h),
                };
                for i in 0..n {
                    point[i] = match base {
                        None => y[i],
                        Some(b) => y[i] + scale * ks[b][i],
                    };
                }
                library.evaluate_point(&point, &mut phi);
                for i in 0..n {
                    ks[stage][i] = dot(&theta[i * p..(i + 1) * p], &phi);
                }
                if record {
                    tape_points[stage] = point.clone();
                    tape_phis[stage] = phi.clone();
                }
            }
            for i in 0..n {
                y[i] += h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
            }
            if record {
                tapes.push(StepTape {
                    points: tape_points,
                    phis: tape_phis,
                });
            }
            if y.iter()
                .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD)
            {
                return Forward {
                    predicted,
                    tapes,
                    diverged: true,
                };
            }
        }
        predicted[(j + 1) * n..(j + 2) * n].copy_from_slice(&y);
    }
    Forward {
        predicted,
        tapes,
        diverged: false,
    }
}

fn mse(predicted: &[f64], observed: &[f64]) -> f64 {
    let sum: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sum / observed.len() as f64
}

/// Mean squared error between the integrated and observed window.
pub fn window_loss(
    library: &PolynomialLibrary,
    theta: &[f64],
    shifts: &[f64],
    window: &WindowData<'_>,
) -> LossValue {
    let fwd = forward(library, theta, shifts, window, false);
    finish(fwd.diverged, || mse(&fwd.predicted, window.states))
}

fn finish(diverged: bool, loss: impl FnOnce() -> f64) -> LossValue {
    if diverged {
        return LossValue {
            loss: DIVERGED_LOSS,
            diverged: true,
        };
    }
    let loss = loss();
    if loss.is_finite() && loss < DIVERGED_LOSS {
        LossValue {
            loss,
            diverged: false,
        }
    } else {
        LossValue {
            loss: DIVERGED_LOSS,
            diverged: true,
        }
    }
}

/// Window loss together with its exact gradient through the unrolled solver.
/// A diverged window has a constant (clipped) loss and zero gradient.
pub fn window_loss_with_gradient(
    library: &PolynomialLibrary,
    theta: &[f64],
    shifts: &[f64],
    window: &WindowData<'_>,
) -> LossGradient {
    let n = window.n_states;
    let m = window.n_inputs;
    let p = library.len();
    let k = window.len();
    let substeps = window.substeps.max(1);
    let h = window.step / substeps as f64;

    let fwd = forward(library, theta, shifts, window, true);
    let value = finish(fwd.diverged, || mse(&fwd.predicted, window.states));
    let mut d_theta = vec![0.0; theta.len()];
    let mut d_shifts = vec![0.0; m];
    if value.diverged {
        return LossGradient {
            value,
            d_theta,
            d_shifts,
        };
    }

    let scale = 2.0 / (k * n) as f64;
    let mut adj = vec![0.0; n];
    let mut w = vec![0.0; p];
    let mut d_point = vec![0.0; n + m];
    let mut d_ks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for j in (1..k).rev() {
        for i in 0..n {
            adj[i] += scale * (fwd.predicted[j * n + i] - window.states[j * n + i]);
        }
        for sub in (0..substeps).rev() {
            let tape = &fwd.tapes[(j - 1) * substeps + sub];
            let weights = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
            for stage in 0..4 {
                for i in 0..n {
                    d_ks[stage][i] = weights[stage] * adj[i];
                }
            }
            // adj currently holds d/dy_next; y_next = y + ..., so d/dy starts there.
            for stage in (0..4).rev() {
                let dk = &d_ks[stage];
                let phi = &tape.phis[stage];
                for i in 0..n {
                    if dk[i] == 0.0 {
                        continue;
                    }
                    let row = &mut d_theta[i * p..(i + 1) * p];
                    for (d, f) in row.iter_mut().zip(phi) {
                        *d += dk[i] * f;
                    }
                }
                w.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..n {
                    let row = &theta[i * p..(i + 1) * p];
                    for (wv, t) in w.iter_mut().zip(row) {
                        *wv += dk[i] * t;
                    }
                }
                library.gradient_dot(&tape.points[stage], &w, &mut d_point);
                for (ds, dp) in d_shifts.iter_mut().zip(&d_point[n..]) {
                    *ds += dp;
                }
                let d_stage = &d_point[..n];
                for i in 0..n {
                    adj[i] += d_stage[i];
                }
                let feed = match stage {
                    3 => Some((2, h)),
                    2 => Some((1, 0.5 * h)),
                    1 => Some((0, 0.5 * h)),
                    _ => None,
                };
                if let Some((prev, factor)) = feed {
                    let (lower, upper) = d_ks.split_at_mut(stage);
                    let _ = upper;
                    for i in 0..n {
                        lower[prev][i] += factor * d_stage[i];
                    }
                }
            }
        }
    }
    LossGradient {
        value,
        d_theta,
        d_shifts,
    }
}

/// ODE loss of a coefficient matrix (with per-input shifts) on a trajectory
/// slice, integrating at the slice's own sampling step.
pub fn ode_loss(theta: &CoefficientMatrix, shifts: &[f64], window: &Trajectory) -> LossValue {
    let states = row_major(window.states());
    let inputs = row_major(window.inputs());
    let data = WindowData {
        states: &states,
        inputs: &inputs,
        n_states: window.n_states(),
        n_inputs: window.n_inputs(),
        step: window.step(),
        substeps: 1,
    };
    window_loss(theta.library(), &theta.to_flat(), shifts, &data)
}

pub(crate) fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
