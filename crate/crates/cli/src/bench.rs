use std::time::Instant;

use beta_loclik::bandwidth::{cv_approx, cv_kfold, cv_naive_loo};
use beta_loclik::kernel::{Degree, KernelSpec};
use beta_loclik::loclik::{fit_curve, regular_grid, Dataset, FitConfig, Optimizer, StartMode};
use beta_loclik::simulation::{simulate_dataset, ToyParams};
use clap::Args;

use crate::error::CliError;

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 201)]
    m: usize,
    #[arg(long, default_value_t = 0.12)]
    h: f64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "newton")]
    optimizer: Optimizer,
}

fn median_ms(reps: usize, mut f: impl FnMut() -> Result<(), CliError>) -> Result<f64, CliError> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn run(a: BenchArgs) -> Result<(), CliError> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let data: Dataset = simulate_dataset(a.m, a.seed, &ToyParams)?;
    let kernel = KernelSpec::gaussian(a.h).map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = regular_grid(101);
    println!("task,degree,median_ms");
    for degree in [Degree::Constant, Degree::Linear] {
        let cfg = FitConfig::new(kernel, degree, a.optimizer);
        let rows: [(&str, Box<dyn Fn() -> Result<(), CliError>>); 4] = [
            ("fit_101", Box::new(|| fit_curve(&data, &grid, &cfg, StartMode::Independent).map(drop).map_err(Into::into))),
            ("cv_naive_loo", Box::new(|| cv_naive_loo(&data, &cfg).map(drop).map_err(Into::into))),
            ("cv_approx", Box::new(|| cv_approx(&data, &cfg).map(drop).map_err(Into::into))),
            ("cv_kfold_5", Box::new(|| cv_kfold(&data, &cfg, 5, a.seed).map(drop).map_err(Into::into))),
        ];
        for (name, f) in rows.iter() {
            let ms = median_ms(a.reps, f)?;
            println!("{name},{degree},{ms:.3}");
        }
    }
    Ok(())
}
