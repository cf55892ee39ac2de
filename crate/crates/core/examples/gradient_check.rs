//! Compares the exact backward pass (BPTT through the GRU and reverse mode
//! through the unrolled RK4 solve) with central finite differences.

use merinda::catalog_system;
use merinda::merinda::{gradient_check, GruModel, WindowSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = catalog_system("lotka")?;
    let library = spec.library();
    let data = spec.simulate(spec.default_dt, 60)?;
    let set = WindowSet::from_trajectory(&data, library, 5, 5, 1)?.with_data_scale(&data, library);
    let n_coef = spec.n_states * library.len();
    let mask = vec![true; n_coef];

    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = GruModel::init_uniform(4, spec.n_states, n_coef, 0, &mut rng);
        let errors = gradient_check(&model, library, &set, &[0, 3, 7, 11], &mask, 0.5, 1e-5)?;
        let line: Vec<String> = errors
            .iter()
            .map(|(block, err)| format!("{}={err:.1e}", block.name()))
            .collect();
        println!("seed {seed}: {}", line.join(" "));
    }
    Ok(())
}
