//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without the libtest harness so the lines always print.
//!
//! The two benchmark runs of the determinism check also supply seeds 0-2 of
//! the 5-seed Lotka and Lorenz checks; seeds 3 and 4 run on their own. The
//! runs are the same code path with the same seeds either way.

use std::error::Error;
use std::time::{Duration, Instant};

use merinda::cost::{
    energy_model, koopman_sweep, memory_model, sweep_correlation, CostConstants, EnergyModelParams,
    MemoryModelParams, EXCHANGE_SCHEDULE,
};
use merinda::dynamics::FnField;
use merinda::harness::{catalog_run_config, run, run_benchmark, ExperimentReport, Method};
use merinda::merinda::{gradient_check, tuned_config, GruModel, WindowSet};
use merinda::sindy::{stlsq_recover, StlsqConfig};
use merinda::{catalog_system, integrate, PolynomialLibrary};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), Box<dyn Error>>;

struct Suite {
    failures: usize,
    lines: Vec<(usize, String)>,
}

impl Suite {
    fn record(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        check: impl FnOnce() -> Check,
    ) {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        self.report(id, name, budget, elapsed, outcome);
    }

    fn report(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        elapsed: Duration,
        outcome: Check,
    ) {
        let (mut pass, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = budget {
            if elapsed > limit {
                pass = false;
                detail.push_str(&format!("; over the {:.0} s budget", limit.as_secs_f64()));
            }
        }
        if !pass {
            self.failures += 1;
        }
        let line = format!(
            "criterion {id:>2} {} {name}: {detail} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        println!("{line}");
        self.lines.push((id, line));
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fixed(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
    format!("[{}]", parts.join(", "))
}

fn rk4_convergence() -> Check {
    let field = FnField::new(1, 0, |x: &[f64], _: &[f64], _: f64, dx: &mut [f64]| {
        dx[0] = -x[0]
    });
    let exact = (-1.0f64).exp();
    let mut errors = Vec::new();
    for steps in [10usize, 20, 40] {
        let h = 1.0 / steps as f64;
        let traj = integrate(&field, &[1.0], &DMatrix::zeros(steps + 1, 0), h, steps + 1)?;
        errors.push((traj.states()[(steps, 0)] - exact).abs());
    }
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    Ok((
        ratios.iter().all(|&r| r >= 15.0),
        format!(
            "endpoint errors {}, ratios {} (need >= 15)",
            sci(&errors),
            fixed(&ratios)
        ),
    ))
}

fn gradient_oracle() -> Check {
    let spec = catalog_system("lotka")?;
    let library = spec.library();
    assert_eq!((spec.n_states, library.max_order()), (2, 2));
    let data = spec.default_trajectory()?;
    let set = WindowSet::from_trajectory(&data, library, 5, 1, 1)?.with_data_scale(&data, library);
    let n_coef = spec.n_states * library.len();
    let mask = vec![true; n_coef];
    let consistency = tuned_config().consistency_weight;
    let mut worst = (0.0f64, "", 0u64);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = GruModel::init_uniform(4, spec.n_states, n_coef, 0, &mut rng);
        let batch: Vec<usize> = (0..4).map(|_| rng.random_range(0..set.len())).collect();
        for (block, err) in gradient_check(&model, library, &set, &batch, &mask, consistency, 1e-5)?
        {
            if err > worst.0 {
                worst = (err, block.name(), seed);
            }
        }
    }
    Ok((
        worst.0 < 1e-4,
        format!(
            "worst per-block relative error {:.2e} ({} at seed {}) over 10 seeds, V=4 n=2 M=2 k=5",
            worst.0, worst.1, worst.2
        ),
    ))
}

fn sindy_exact_support() -> Check {
    let spec = catalog_system("lotka")?;
    let data = spec.default_trajectory()?;
    let config = StlsqConfig {
        threshold: spec.sindy_threshold,
        ..StlsqConfig::default()
    };
    let fit = stlsq_recover(&data, spec.library().clone(), &config)?;
    let truth = &spec.true_coefficients;
    let same_support = fit.coefficients.support() == truth.support() && truth.sparsity() == 4;
    let worst = truth
        .support()
        .into_iter()
        .map(|(i, j)| ((fit.coefficients.get(i, j) - truth.get(i, j)) / truth.get(i, j)).abs())
        .fold(0.0, f64::max);
    Ok((
        same_support && worst < 1e-3,
        format!(
            "support {:?} (truth {:?}), worst relative error {worst:.2e}",
            fit.coefficients.support(),
            truth.support()
        ),
    ))
}

fn cost_exactness() -> Check {
    let memory = memory_model(&MemoryModelParams {
        n: 2,
        m: 2,
        v: 16,
        b_c: 32,
        b_r: 32,
    })?;
    let energy = energy_model(&EnergyModelParams {
        n: 1,
        m: 1,
        v: 1,
        w_c: 1,
        p_f_c: 1.0,
        p_b_c: 1.0,
        p_f_a: 1.0,
        p_b_a: 1.0,
        p_f_l: 1.0,
        p_b_l: 1.0,
        p_m: 1.0,
        h: 2,
        t: 1,
        stiffness: 1.0,
    })?;
    Ok((
        memory == 1792 && energy == 20.0,
        format!("memory(2,2,16,32,32) = {memory}, unit energy = {energy}"),
    ))
}

fn exchange_trend() -> Check {
    let points = koopman_sweep(&EXCHANGE_SCHEDULE, &CostConstants::default())?;
    let memory: Vec<u128> = points.iter().map(|p| p.memory_bits).collect();
    let energy: Vec<f64> = points.iter().map(|p| p.energy_units).collect();
    let corr = sweep_correlation(&points)?;
    let increasing = memory.windows(2).all(|w| w[0] < w[1]);
    Ok((
        increasing && energy[2] < energy[1] && corr.r < 0.0,
        format!(
            "memory {memory:?}, energy {energy:?}, pearson r {:.4}",
            corr.r
        ),
    ))
}

fn gru_flow_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut gates_ok, mut steps) = (0.0f64, true, 0);
    for _ in 0..10 {
        let v = rng.random_range(1..=12);
        let inputs = rng.random_range(1..=6);
        let model = GruModel::init_uniform(v, inputs, 3, 0, &mut rng);
        let mut a: Vec<f64> = (0..v).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..100 {
            let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (next, cache) = model.cell_forward(&a, &x);
            for i in 0..v {
                worst = worst.max((next[i] - (a[i] + cache.z[i] * (cache.cc[i] - a[i]))).abs());
            }
            gates_ok &= cache.r.iter().chain(&cache.z).all(|&g| g > 0.0 && g < 1.0);
            a = next;
            steps += 1;
        }
    }
    Ok((
        worst <= 1e-12 && gates_ok && steps == 1000,
        format!("{steps} steps, max |a - (a_prev + z (cc - a_prev))| = {worst:.2e}, gates in (0,1): {gates_ok}"),
    ))
}

fn pascal(n: usize, m: usize) -> u128 {
    // C(m + n, n) by the additive recurrence only.
    let size = n + m + 1;
    let mut row = vec![1u128];
    for _ in 1..size {
        let mut next = vec![1u128; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row[n]
}

fn library_sizing() -> Check {
    let mut mismatches = Vec::new();
    for n in 1..=6 {
        for m in 1..=4 {
            let len = PolynomialLibrary::new(n, m)?.len() as u128;
            if len != pascal(n, m) {
                mismatches.push((n, m, len));
            }
        }
    }
    let paper_case = PolynomialLibrary::new(3, 2)?.len();
    Ok((
        mismatches.is_empty() && paper_case == 10,
        format!("24 (n, M) pairs, mismatches {mismatches:?}, (n=3, M=2) -> {paper_case}"),
    ))
}

fn merinda_runs<'a>(reports: &'a [ExperimentReport], system: &str) -> Vec<&'a ExperimentReport> {
    reports
        .iter()
        .filter(|r| r.system == system && r.method == Method::Merinda)
        .collect()
}

fn main() {
    let mut suite = Suite {
        failures: 0,
        lines: Vec::new(),
    };
    let secs = Duration::from_secs;

    suite.record(1, "RK4 convergence", Some(secs(1)), rk4_convergence);
    suite.record(2, "gradient oracle", Some(secs(30)), gradient_oracle);
    suite.record(3, "SINDy exact support", Some(secs(5)), sindy_exact_support);
    suite.record(6, "cost-model exactness", None, cost_exactness);
    suite.record(7, "memory-energy trend", Some(secs(1)), exchange_trend);
    suite.record(8, "GRU flow identity", Some(secs(1)), gru_flow_identity);
    suite.record(10, "library sizing", Some(secs(1)), library_sizing);

    // Determinism, then the 5-seed table checks on top of its runs.
    let bench_budget = secs(30 * 60);
    let start = Instant::now();
    let first = run_benchmark("table3", 3);
    let first_time = start.elapsed();
    let second = run_benchmark("table3", 3);
    let elapsed = start.elapsed();
    let mut first_reports = Vec::new();
    let outcome: Check = match (first, second) {
        (Ok(a), Ok(b)) => {
            let (csv_a, csv_b) = (a.summary_csv(), b.summary_csv());
            print!("{csv_a}");
            first_reports = a.reports;
            let pass = csv_a == csv_b
                && first_time <= bench_budget
                && elapsed - first_time <= bench_budget;
            Ok((
                pass,
                format!(
                    "summary CSVs identical: {}; runs took {:.0} s and {:.0} s (budget {:.0} s each)",
                    csv_a == csv_b,
                    first_time.as_secs_f64(),
                    (elapsed - first_time).as_secs_f64(),
                    bench_budget.as_secs_f64()
                ),
            ))
        }
        (Err(e), _) | (_, Err(e)) => Err(e.into()),
    };
    suite.report(9, "benchmark determinism", None, elapsed, outcome);

    for (id, system, epsilon, budget) in
        [(4, "lotka", 0.1, secs(600)), (5, "lorenz", 5.0, secs(1200))]
    {
        let mut time = Duration::ZERO;
        let outcome = (|| -> Check {
            let mut reports: Vec<ExperimentReport> = merinda_runs(&first_reports, system)
                .into_iter()
                .cloned()
                .collect();
            let config = catalog_run_config(system, Method::Merinda)?;
            for seed in reports.len() as u64..5 {
                reports.push(run(&config, seed)?.report);
            }
            time = reports
                .iter()
                .map(|r| Duration::from_secs_f64(r.wall_time))
                .sum();
            let mses: Vec<f64> = reports.iter().map(|r| r.reconstruction_mse).collect();
            let mean = mses.iter().sum::<f64>() / mses.len() as f64;
            let diverged = reports.iter().any(|r| r.reconstruction_diverged);
            let full_nonlinear = reports
                .iter()
                .filter(|r| r.nonlinear_recall == Some(1.0))
                .count();
            let support_ok = system != "lorenz" || full_nonlinear >= 3;
            Ok((
                mses.len() == 5 && mean <= epsilon && !diverged && support_ok,
                format!(
                    "5-seed mean reconstruction MSE {mean:.3e} (<= {epsilon}), per seed {}, \
                     nonlinear support recovered in {full_nonlinear}/5 seeds",
                    sci(&mses)
                ),
            ))
        })();
        suite.report(
            id,
            &format!("{system} desk-scale accuracy"),
            Some(budget),
            time,
            outcome,
        );
    }

    suite.lines.sort();
    println!("\nsummary");
    for (_, line) in &suite.lines {
        println!("{line}");
    }
    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
