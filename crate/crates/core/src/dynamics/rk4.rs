use nalgebra::DMatrix;

use super::{DynamicsError, Trajectory};

/// Any state magnitude above this is treated as divergence.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// A vector field `dx/dt = f(x, u, t)`.
pub trait VectorField: Sync {
    fn n_states(&self) -> usize;

    fn n_inputs(&self) -> usize;

    fn eval(&self, x: &[f64], u: &[f64], t: f64, dx: &mut [f64]);
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }

    fn n_inputs(&self) -> usize {
        (**self).n_inputs()
    }

    fn eval(&self, x: &[f64], u: &[f64], t: f64, dx: &mut [f64]) {
        (**self).eval(x, u, t, dx)
    }
}

/// Wraps a closure as a [`VectorField`].
pub struct FnField<F> {
    n_states: usize,
    n_inputs: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &[f64], f64, &mut [f64]) + Sync,
{
    pub fn new(n_states: usize, n_inputs: usize, f: F) -> Self {
        Self {
            n_states,
            n_inputs,
            f,
        }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &[f64], f64, &mut [f64]) + Sync,
{
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn eval(&self, x: &[f64], u: &[f64], t: f64, dx: &mut [f64]) {
        (self.f)(x, u, t, dx)
    }
}

/// One classical RK4 step with `u` held constant over the step.
pub fn rk4_step<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    u: &[f64],
    t: f64,
    h: f64,
) -> Result<Vec<f64>, DynamicsError> {
    if !(h > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let mut scratch = Rk4Scratch::new(x.len());
    let mut next = vec![0.0; x.len()];
    scratch.step(field, x, u, t, h, &mut next);
    if diverged(&next) {
        return Err(DynamicsError::IntegrationDiverged { step: 0 });
    }
    Ok(next)
}

pub(crate) struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    pub(crate) fn step<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        x: &[f64],
        u: &[f64],
        t: f64,
        h: f64,
        out: &mut [f64],
    ) {
        let half = 0.5 * h;
        field.eval(x, u, t, &mut self.k1);
        for i in 0..x.len() {
            self.stage[i] = x[i] + half * self.k1[i];
        }
        field.eval(&self.stage, u, t + half, &mut self.k2);
        for i in 0..x.len() {
            self.stage[i] = x[i] + half * self.k2[i];
        }
        field.eval(&self.stage, u, t + half, &mut self.k3);
        for i in 0..x.len() {
            self.stage[i] = x[i] + h * self.k3[i];
        }
        field.eval(&self.stage, u, t + h, &mut self.k4);
        for i in 0..x.len() {
            out[i] =
                x[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

pub(crate) fn diverged(x: &[f64]) -> bool {
    x.iter()
        .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD)
}

/// Integrates from `x0` at `t = 0` for `n_samples` samples.
///
/// Row `i` of `inputs` is held over the step from sample `i` to `i + 1`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    inputs: &DMatrix<f64>,
    h: f64,
    n_samples: usize,
) -> Result<Trajectory, DynamicsError> {
    integrate_from(field, x0, inputs, 0.0, h, n_samples)
}

pub fn integrate_from<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    inputs: &DMatrix<f64>,
    t0: f64,
    h: f64,
    n_samples: usize,
) -> Result<Trajectory, DynamicsError> {
    let n = field.n_states();
    if n_samples < 2 {
        return Err(DynamicsError::InvalidArgument(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if !(h > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    if x0.len() != n {
        return Err(DynamicsError::InvalidArgument(format!(
            "initial state has {} entries, field expects {n}",
            x0.len()
        )));
    }
    if inputs.nrows() != n_samples || inputs.ncols() != field.n_inputs() {
        return Err(DynamicsError::InvalidArgument(format!(
            "inputs are {}x{}, expected {n_samples}x{}",
            inputs.nrows(),
            inputs.ncols(),
            field.n_inputs()
        )));
    }

    let mut states = DMatrix::zeros(n_samples, n);
    let mut scratch = Rk4Scratch::new(n);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut u: Vec<f64> = vec![0.0; inputs.ncols()];
    states.row_mut(0).copy_from_slice(&x);
    for step in 0..n_samples - 1 {
        for (j, uj) in u.iter_mut().enumerate() {
            *uj = inputs[(step, j)];
        }
        let t = t0 + step as f64 * h;
        scratch.step(field, &x, &u, t, h, &mut next);
        if diverged(&next) {
            return Err(DynamicsError::IntegrationDiverged { step: step + 1 });
        }
        std::mem::swap(&mut x, &mut next);
        states.row_mut(step + 1).copy_from_slice(&x);
    }
    Trajectory::on_grid(t0, h, states, inputs.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::type_complexity)]
    fn decay() -> FnField<impl Fn(&[f64], &[f64], f64, &mut [f64]) + Sync> {
        FnField::new(1, 0, |x, _, _, dx| dx[0] = -x[0])
    }

    #[test]
    fn decay_single_step_matches_hand_stages() {
        // Stages by hand for f(x) = -x, x = 1, h = 0.1.
        let (x, h) = (1.0f64, 0.1f64);
        let k1 = -x;
        let k2 = -(x + h / 2.0 * k1);
        let k3 = -(x + h / 2.0 * k2);
        let k4 = -(x + h * k3);
        let by_hand = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let got = rk4_step(&decay(), &[1.0], &[], 0.0, 0.1).unwrap()[0];
        assert_eq!(got, by_hand);
        assert!((got - 0.9048375).abs() < 5e-8);
        assert!((got - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_and_constant_fields() {
        let zero = FnField::new(2, 0, |_, _, _, dx: &mut [f64]| dx.fill(0.0));
        assert_eq!(
            rk4_step(&zero, &[3.0, -2.0], &[], 0.0, 0.7).unwrap(),
            vec![3.0, -2.0]
        );
        let one = FnField::new(1, 0, |_, _, _, dx: &mut [f64]| dx[0] = 1.0);
        assert_eq!(rk4_step(&one, &[0.0], &[], 0.0, 0.5).unwrap(), vec![0.5]);
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(rk4_step(&decay(), &[1.0], &[], 0.0, 0.0).is_err());
    }

    #[test]
    fn step_reports_divergence() {
        let blowup = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = x[0] * 1e20);
        let err = rk4_step(&blowup, &[1.0], &[], 0.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            DynamicsError::IntegrationDiverged { step: 0 }
        ));
    }

    #[test]
    fn integrate_decay_to_one() {
        let traj = integrate(&decay(), &[1.0], &DMatrix::zeros(11, 0), 0.1, 11).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj.states()[(0, 0)], 1.0);
        assert!((traj.states()[(10, 0)] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn two_samples_is_one_step() {
        let traj = integrate(&decay(), &[1.0], &DMatrix::zeros(2, 0), 0.1, 2).unwrap();
        let single = rk4_step(&decay(), &[1.0], &[], 0.0, 0.1).unwrap();
        assert_eq!(traj.states()[(1, 0)], single[0]);
    }

    #[test]
    fn divergence_reports_step_index() {
        let growth = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let err = integrate(&growth, &[1.0], &DMatrix::zeros(100, 0), 0.1, 100).unwrap_err();
        match err {
            DynamicsError::IntegrationDiverged { step } => assert!(step > 1 && step < 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_order_hold_matches_constant_field() {
        let driven = FnField::new(1, 1, |x, u, _, dx: &mut [f64]| dx[0] = -x[0] + u[0]);
        let baked = FnField::new(1, 0, |x, _, _, dx: &mut [f64]| dx[0] = -x[0] + 0.75);
        let held = integrate(
            &driven,
            &[0.2],
            &DMatrix::from_element(50, 1, 0.75),
            0.05,
            50,
        )
        .unwrap();
        let constant = integrate(&baked, &[0.2], &DMatrix::zeros(50, 0), 0.05, 50).unwrap();
        assert_eq!(held.states(), constant.states());
    }

    #[test]
    fn inputs_change_between_steps_only() {
        // Step input switching at sample 1: the first step must see u = 0 only.
        let driven = FnField::new(1, 1, |_, u, _, dx: &mut [f64]| dx[0] = u[0]);
        let inputs = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 1.0]);
        let traj = integrate(&driven, &[0.0], &inputs, 0.5, 3).unwrap();
        assert_eq!(traj.states()[(1, 0)], 0.0);
        assert_eq!(traj.states()[(2, 0)], 0.5);
    }

    #[test]
    fn dimension_checks() {
        assert!(integrate(&decay(), &[1.0, 2.0], &DMatrix::zeros(3, 0), 0.1, 3).is_err());
        assert!(integrate(&decay(), &[1.0], &DMatrix::zeros(3, 1), 0.1, 3).is_err());
        assert!(integrate(&decay(), &[1.0], &DMatrix::zeros(1, 0), 0.1, 1).is_err());
    }
}
