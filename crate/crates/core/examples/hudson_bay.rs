//! STLSQ on the Hudson Bay hare and lynx pelt counts. The series is short
//! and noisy, so this shows the baseline on real data rather than a
//! recovery with a known answer.

use std::sync::Arc;

use merinda::sindy::{reconstruction_error, stlsq_recover, StlsqConfig};
use merinda::{hudson_bay_dataset, PolynomialLibrary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = hudson_bay_dataset();
    let library = Arc::new(PolynomialLibrary::for_system(2, 0, 2)?);
    println!(
        "{} yearly samples, library {:?}",
        data.len(),
        library.term_names()
    );

    for threshold in [0.005, 0.02, 0.1] {
        let config = StlsqConfig {
            threshold,
            ..StlsqConfig::default()
        };
        let fit = stlsq_recover(&data, library.clone(), &config)?;
        let rec = reconstruction_error(&fit.coefficients, &data)?;
        println!(
            "threshold={threshold:<6} support={} reconstruction_mse={:.3e} diverged={}",
            fit.coefficients.sparsity(),
            rec.mse,
            rec.diverged
        );
        print!("{}", fit.coefficients.to_csv_string());
    }
    Ok(())
}
