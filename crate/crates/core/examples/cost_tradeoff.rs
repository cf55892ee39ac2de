//! Memory and energy estimates along the exchange schedule and over the
//! catalog systems, with the memory-energy correlation.

use merinda::cost::{
    catalog_sweep, koopman_sweep, memory_model, sweep_correlation, write_sweep_csv, CostConstants,
    EXCHANGE_SCHEDULE,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = CostConstants::default();
    println!(
        "memory(N=2, M=2) = {} bits",
        memory_model(&constants.memory_params(2, 2))?
    );

    let schedule = koopman_sweep(&EXCHANGE_SCHEDULE, &constants)?;
    let stdout = std::io::stdout();
    write_sweep_csv(stdout.lock(), &schedule)?;
    let corr = sweep_correlation(&schedule)?;
    println!("schedule: r={:.4} p={:.4}\n", corr.r, corr.p_value);

    let catalog = catalog_sweep(&constants)?;
    write_sweep_csv(stdout.lock(), &catalog)?;
    Ok(())
}
