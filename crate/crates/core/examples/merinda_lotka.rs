//! Trains the GRU flow on Lotka-Volterra with the catalog preset, prints the
//! recovered model and saves a checkpoint that reloads to the same outputs.

use merinda::catalog_system;
use merinda::merinda::{recover, system_preset, Checkpoint, DataSource};
use merinda::NoiseSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = catalog_system("lotka")?;
    let config = system_preset(&spec);
    let source = DataSource::Catalog {
        name: "lotka".into(),
        noise: NoiseSpec::none(),
    };
    let run = recover(&source, &config, Some(0.1))?;
    let result = &run.result;

    let history = &result.loss_history;
    for epoch in (0..history.len()).step_by(50) {
        println!("epoch {epoch:>4} loss {:.3e}", history[epoch]);
    }
    println!(
        "reconstruction_mse={:.3e} coefficient_mse={:.3e} support={} pass={}",
        result.reconstruction_mse,
        result.coefficient_mse.unwrap_or(f64::NAN),
        result.coefficients.sparsity(),
        run.pass
    );
    print!("{}", result.coefficients.to_csv_string());

    let path = std::env::temp_dir().join("merinda_lotka_checkpoint.json");
    Checkpoint::from_result(result).write_json(std::fs::File::create(&path)?)?;
    let reloaded = Checkpoint::read_json(std::fs::File::open(&path)?)?.model()?;
    assert_eq!(&reloaded, &result.model);
    println!("checkpoint written to {}", path.display());
    Ok(())
}
