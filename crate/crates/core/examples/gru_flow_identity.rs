//! Random GRU steps: the new state equals `a_prev + z * (cc - a_prev)` and
//! every gate lies strictly inside (0, 1).

use merinda::merinda::GruModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = GruModel::init_uniform(8, 3, 4, 0, &mut rng);
    let mut worst: f64 = 0.0;
    let mut gate_range = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let a_prev: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (a, cache) = model.cell_forward(&a_prev, &x);
        for i in 0..8 {
            let flow = a_prev[i] + cache.z[i] * (cache.cc[i] - a_prev[i]);
            worst = worst.max((a[i] - flow).abs());
        }
        for &g in cache.r.iter().chain(&cache.z) {
            gate_range = (gate_range.0.min(g), gate_range.1.max(g));
        }
    }
    println!("max |a - flow form| = {worst:.2e}");
    println!("gates in [{:.4}, {:.4}]", gate_range.0, gate_range.1);
}
