use nalgebra::DMatrix;

use super::Trajectory;

/// Hudson's Bay Company hare and lynx pelts, thousands per year, 1900-1920.
///
/// Rows are `(year, hare, lynx)`. This is the widely reproduced table of
/// yearly pelt records (Odum, *Fundamentals of Ecology*, 1953), also used as
/// the predator-prey example in the SINDy-MPC literature.
pub const HUDSON_BAY_PELTS: [(f64, f64, f64); 21] = [
    (1900.0, 30.0, 4.0),
    (1901.0, 47.2, 6.1),
    (1902.0, 70.2, 9.8),
    (1903.0, 77.4, 35.2),
    (1904.0, 36.3, 59.4),
    (1905.0, 20.6, 41.7),
    (1906.0, 18.1, 19.0),
    (1907.0, 21.4, 13.0),
    (1908.0, 22.0, 8.3),
    (1909.0, 25.4, 9.1),
    (1910.0, 27.1, 7.4),
    (1911.0, 40.3, 8.0),
    (1912.0, 57.0, 12.3),
    (1913.0, 76.6, 19.5),
    (1914.0, 52.3, 45.7),
    (1915.0, 19.5, 51.1),
    (1916.0, 11.2, 29.7),
    (1917.0, 7.6, 15.8),
    (1918.0, 14.6, 9.7),
    (1919.0, 16.2, 10.1),
    (1920.0, 24.7, 8.6),
];

/// The pelt table as a two-state trajectory (`x0` = hare, `x1` = lynx) with
/// yearly timestamps and no inputs.
pub fn hudson_bay_dataset() -> Trajectory {
    let n = HUDSON_BAY_PELTS.len();
    let times = HUDSON_BAY_PELTS.iter().map(|r| r.0).collect();
    let states = DMatrix::from_fn(n, 2, |i, j| {
        let (_, hare, lynx) = HUDSON_BAY_PELTS[i];
        if j == 0 {
            hare
        } else {
            lynx
        }
    });
    Trajectory::new(times, states, DMatrix::zeros(n, 0)).expect("embedded table is well formed")
}
