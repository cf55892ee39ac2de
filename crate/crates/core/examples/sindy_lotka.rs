//! STLSQ on clean and noisy Lotka-Volterra data, compared with the ground
//! truth.

use merinda::dynamics::add_noise;
use merinda::harness::support_metrics;
use merinda::sindy::{reconstruction_error, stlsq_recover, StlsqConfig};
use merinda::{catalog_system, NoiseSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = catalog_system("lotka")?;
    let clean = spec.default_trajectory()?;
    let config = StlsqConfig {
        threshold: spec.sindy_threshold,
        ..StlsqConfig::default()
    };

    for sigma in [0.0, 0.01, 0.05] {
        let data = add_noise(&clean, &NoiseSpec::gaussian(sigma, 7));
        let fit = stlsq_recover(&data, spec.library().clone(), &config)?;
        let (precision, recall) = support_metrics(&fit.coefficients, &spec.true_coefficients);
        let rec = reconstruction_error(&fit.coefficients, &clean)?;
        println!(
            "sigma={sigma:<5} sweeps={} support={} precision={precision:.2} recall={recall:.2} \
             coefficient_mse={:.3e} reconstruction_mse={:.3e}",
            fit.sweeps_used,
            fit.coefficients.sparsity(),
            fit.coefficients.mse(&spec.true_coefficients)?,
            rec.mse
        );
        if sigma == 0.0 {
            print!("{}", fit.coefficients.to_csv_string());
        }
    }
    Ok(())
}
