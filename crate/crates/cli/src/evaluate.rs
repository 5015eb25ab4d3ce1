use std::path::PathBuf;

use beta_loclik::betadist::ParamLog;
use beta_loclik::cohort::{mean_loglik_with, paired_t_test};
use beta_loclik::loclik::interp_pair;
use clap::Args;

use crate::error::CliError;
use crate::io::{fmt, read_pairs, read_shape_curve, CsvOut, ShapeCurve};
use crate::TimeUnit;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model curves (`t,alpha,beta`), one per holdout file.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    /// Held-out observations (`t,y`).
    #[arg(long, required = true)]
    holdout: Vec<PathBuf>,
    /// A second model per holdout file; compared with a paired t-test.
    #[arg(long)]
    compare: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    /// Per-holdout values as CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Mean log-likelihood with log-shapes interpolated linearly on the model grid.
fn score(model: &ShapeCurve, holdout: &[(f64, f64)]) -> Result<f64, CliError> {
    let (lo, hi) = (model.grid[0], model.grid[model.grid.len() - 1]);
    let slack = 1e-12 * (1.0 + hi.abs());
    if let Some(&(t, _)) = holdout.iter().find(|(t, _)| *t < lo - slack || *t > hi + slack) {
        return Err(CliError::Data(format!("holdout time {t} lies outside the model grid")));
    }
    let delta: Vec<f64> = model.alpha.iter().map(|a| a.ln()).collect();
    let eta: Vec<f64> = model.beta.iter().map(|b| b.ln()).collect();
    Ok(mean_loglik_with(
        |t| {
            let (delta, eta) = interp_pair(&model.grid, &delta, &eta, t);
            ParamLog { delta, eta }
        },
        holdout,
    )?)
}

pub fn run(a: EvaluateArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    if a.model.len() != a.holdout.len() {
        return Err(CliError::Usage("give one --model per --holdout".into()));
    }
    if !a.compare.is_empty() && a.compare.len() != a.holdout.len() {
        return Err(CliError::Usage("give one --compare per --holdout".into()));
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (k, h) in a.holdout.iter().enumerate() {
        let pairs = read_pairs(h, tu)?;
        first.push(score(&read_shape_curve(&a.model[k], tu)?, &pairs)?);
        if let Some(c) = a.compare.get(k) {
            second.push(score(&read_shape_curve(c, tu)?, &pairs)?);
        }
    }

    if let Some(path) = &a.out {
        let header: &[&str] = if second.is_empty() {
            &["holdout", "model"]
        } else {
            &["holdout", "model", "compare"]
        };
        let mut w = CsvOut::create(path, header)?;
        for k in 0..first.len() {
            let mut row = vec![k.to_string(), fmt(first[k])];
            if let Some(&s) = second.get(k) {
                row.push(fmt(s));
            }
            w.row(row)?;
        }
        w.finish()?;
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean_loglik,{}", fmt(mean(&first)));
    if !second.is_empty() {
        println!("mean_loglik_compare,{}", fmt(mean(&second)));
        if first.len() >= 2 {
            let t = paired_t_test(&first, &second)?;
            println!("t_stat,{}", fmt(t.t_stat));
            println!("df,{}", fmt(t.df));
            println!("p_value,{}", fmt(t.p_value));
            println!("mean_diff,{}", fmt(t.mean_diff));
        }
    }
    Ok(())
}
