//! Simulates every catalog system at its default horizon and prints a short
//! summary plus the head of the Lotka-Volterra CSV.

use merinda::catalog_system;
use merinda::dynamics::CATALOG_NAMES;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in CATALOG_NAMES {
        let spec = catalog_system(name)?;
        let traj = spec.default_trajectory()?;
        let last = traj.state_row(traj.len() - 1);
        println!(
            "{:<11} states={} inputs={} samples={} dt={} library_terms={} x(T)={:.4?}",
            spec.name,
            spec.n_states,
            spec.n_inputs,
            traj.len(),
            traj.step(),
            spec.library().len(),
            last
        );
    }

    let lotka = catalog_system("lotka")?.simulate(0.01, 6)?;
    println!("\n{}", lotka.to_csv_string());
    Ok(())
}
