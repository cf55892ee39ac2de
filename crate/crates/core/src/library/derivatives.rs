use nalgebra::DMatrix;

use super::LibraryError;
use crate::dynamics::Trajectory;

/// Time derivatives of the states by fourth-order finite differences:
/// five-point central stencils inside and one-sided five-point stencils at
/// the two samples nearest each end. Three or four samples fall back to the
/// second-order central/three-point scheme. Exact on quartics (quadratics
/// for the fallback).
pub fn finite_difference_derivatives(traj: &Trajectory) -> Result<DMatrix<f64>, LibraryError> {
    let n = traj.len();
    if n < 3 {
        return Err(LibraryError::TooShort(n));
    }
    let h = traj.step();
    let x = traj.states();
    let mut dx = DMatrix::zeros(n, x.ncols());
    for j in 0..x.ncols() {
        let c = |i: usize| x[(i, j)];
        if n < 5 {
            dx[(0, j)] = (-3.0 * c(0) + 4.0 * c(1) - c(2)) / (2.0 * h);
            for i in 1..n - 1 {
                dx[(i, j)] = (c(i + 1) - c(i - 1)) / (2.0 * h);
            }
            dx[(n - 1, j)] = (3.0 * c(n - 1) - 4.0 * c(n - 2) + c(n - 3)) / (2.0 * h);
            continue;
        }
        let d = 12.0 * h;
        dx[(0, j)] = (-25.0 * c(0) + 48.0 * c(1) - 36.0 * c(2) + 16.0 * c(3) - 3.0 * c(4)) / d;
        dx[(1, j)] = (-3.0 * c(0) - 10.0 * c(1) + 18.0 * c(2) - 6.0 * c(3) + c(4)) / d;
        for i in 2..n - 2 {
            dx[(i, j)] = (c(i - 2) - 8.0 * c(i - 1) + 8.0 * c(i + 1) - c(i + 2)) / d;
        }
        let e = n - 1;
        dx[(e - 1, j)] =
            (3.0 * c(e) + 10.0 * c(e - 1) - 18.0 * c(e - 2) + 6.0 * c(e - 3) - c(e - 4)) / d;
        dx[(e, j)] = (25.0 * c(e) - 48.0 * c(e - 1) + 36.0 * c(e - 2) - 16.0 * c(e - 3)
            + 3.0 * c(e - 4))
            / d;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, h: f64, n: usize) -> Trajectory {
        let states = DMatrix::from_fn(n, 1, |i, _| f(i as f64 * h));
        Trajectory::on_grid(0.0, h, states, DMatrix::zeros(n, 0)).unwrap()
    }

    #[test]
    fn exact_on_quadratics() {
        let traj = sampled(|t| t * t, 0.1, 11);
        let dx = finite_difference_derivatives(&traj).unwrap();
        for i in 0..11 {
            let t = traj.times()[i];
            assert!((dx[(i, 0)] - 2.0 * t).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn constant_gives_zero() {
        let traj = sampled(|_| 4.2, 0.5, 6);
        let dx = finite_difference_derivatives(&traj).unwrap();
        assert!(dx.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn exact_on_quartics_including_ends() {
        let traj = sampled(|t| t.powi(4) - 2.0 * t.powi(3) + t, 0.1, 12);
        let dx = finite_difference_derivatives(&traj).unwrap();
        for i in 0..12 {
            let t = traj.times()[i];
            let exact = 4.0 * t.powi(3) - 6.0 * t * t + 1.0;
            assert!((dx[(i, 0)] - exact).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn short_series_use_the_second_order_fallback() {
        let traj = sampled(|t| t * t, 0.5, 4);
        let dx = finite_difference_derivatives(&traj).unwrap();
        for i in 0..4 {
            assert!((dx[(i, 0)] - 2.0 * traj.times()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_fourth_order_error() {
        // Halving h cuts the worst error about 16-fold.
        let worst = |h: f64| {
            let n = (6.0 / h) as usize;
            let traj = sampled(f64::sin, h, n);
            let dx = finite_difference_derivatives(&traj).unwrap();
            (0..n)
                .map(|i| (dx[(i, 0)] - (i as f64 * h).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (worst(0.02), worst(0.01));
        assert!(fine < 1e-8, "{fine}");
        assert!(coarse / fine > 12.0, "{}", coarse / fine);
    }

    #[test]
    fn too_short() {
        let traj = sampled(|t| t, 1.0, 2);
        assert!(matches!(
            finite_difference_derivatives(&traj),
            Err(LibraryError::TooShort(2))
        ));
    }
}
