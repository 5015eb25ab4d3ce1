use std::path::PathBuf;

use beta_loclik::loclik::regular_grid;
use beta_loclik::simulation::{
    cohort_params, complement, simulate_cohort, simulate_dataset, subsample_independent, ParamCurve, ToyParams,
};
use clap::Args;

use crate::error::CliError;
use crate::io::{fmt, CsvOut};
use crate::TimeUnit;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// The two-bump toy generator on [0,1] (the default).
    #[arg(long, conflicts_with = "multilevel")]
    toy: bool,
    /// Day curves on a common grid from random harmonic shape curves.
    #[arg(long)]
    multilevel: bool,
    /// Toy sample size.
    #[arg(long, default_value_t = 201)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Days per individual (multilevel).
    #[arg(long, default_value_t = 14)]
    days: usize,
    /// Grid points per day (multilevel).
    #[arg(long, default_value_t = 97)]
    per_day: usize,
    /// Individuals (multilevel); more than one writes an `id` column.
    #[arg(long, default_value_t = 1)]
    individuals: usize,
    /// Keep a uniform random subsample of this many observations as `t,y`
    /// (multilevel, one individual); the rest go to `--holdout`.
    #[arg(long, requires = "holdout")]
    subsample: Option<usize>,
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Also write the generating alpha(t), beta(t).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    #[arg(long, short)]
    out: PathBuf,
}

pub fn run(a: SimulateArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    if !a.multilevel {
        let data = simulate_dataset(a.m, a.seed, &ToyParams)?;
        let mut w = CsvOut::create(&a.out, &["t", "y"])?;
        for (&t, &y) in data.times().iter().zip(data.values()) {
            w.row([fmt(tu.emit(t)), fmt(y)])?;
        }
        w.finish()?;
        if let Some(path) = &a.truth {
            write_truth(path, tu, &[(None, &ToyParams as &dyn ParamCurve)], &regular_grid(101))?;
        }
        return Ok(());
    }

    if a.individuals == 0 {
        return Err(CliError::Usage("--individuals must be at least 1".into()));
    }
    let params = cohort_params(a.individuals, a.seed);
    let samples = simulate_cohort(&params, a.days, a.per_day, a.seed)?;
    let grid = samples[0].grid.clone();
    if let Some(m) = a.subsample {
        if a.individuals != 1 {
            return Err(CliError::Usage("--subsample needs a single individual".into()));
        }
        let sub = subsample_independent(&samples[0], m, a.seed)?;
        let mut w = CsvOut::create(&a.out, &["t", "y"])?;
        for (&t, &y) in sub.data.times().iter().zip(sub.data.values()) {
            w.row([fmt(tu.emit(t)), fmt(y)])?;
        }
        w.finish()?;
        let rest = complement(&samples[0], &sub.picked);
        let mut h = CsvOut::create(a.holdout.as_ref().expect("required by clap"), &["t", "y"])?;
        for (t, y) in rest {
            h.row([fmt(tu.emit(t)), fmt(y)])?;
        }
        h.finish()?;
    } else if a.individuals == 1 {
        let mut w = CsvOut::create(&a.out, &["day", "t", "y"])?;
        for (d, day) in samples[0].values.iter().enumerate() {
            for (&t, &y) in grid.iter().zip(day) {
                w.row([d.to_string(), fmt(tu.emit(t)), fmt(y)])?;
            }
        }
        w.finish()?;
    } else {
        let mut w = CsvOut::create(&a.out, &["id", "day", "t", "y"])?;
        for (i, s) in samples.iter().enumerate() {
            for (d, day) in s.values.iter().enumerate() {
                for (&t, &y) in grid.iter().zip(day) {
                    w.row([i.to_string(), d.to_string(), fmt(tu.emit(t)), fmt(y)])?;
                }
            }
        }
        w.finish()?;
    }
    if let Some(path) = &a.truth {
        let curves: Vec<(Option<usize>, &dyn ParamCurve)> = params
            .iter()
            .enumerate()
            .map(|(i, p)| ((a.individuals > 1).then_some(i), p as &dyn ParamCurve))
            .collect();
        write_truth(path, tu, &curves, &grid)?;
    }
    Ok(())
}

fn write_truth(
    path: &std::path::Path,
    tu: TimeUnit,
    curves: &[(Option<usize>, &dyn ParamCurve)],
    grid: &[f64],
) -> Result<(), CliError> {
    let with_id = curves.iter().any(|(id, _)| id.is_some());
    let header: &[&str] = if with_id { &["id", "t", "alpha", "beta"] } else { &["t", "alpha", "beta"] };
    let mut w = CsvOut::create(path, header)?;
    for (id, c) in curves {
        for &t in grid {
            let p = c.params_at(t);
            let mut row = Vec::with_capacity(4);
            if let Some(i) = id {
                row.push(i.to_string());
            }
            row.extend([fmt(tu.emit(t)), fmt(p.alpha), fmt(p.beta)]);
            w.row(row)?;
        }
    }
    w.finish()
}
