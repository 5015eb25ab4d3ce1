use std::path::PathBuf;

use beta_loclik::bandwidth::{
    argmax_prefer_larger, default_grid, evaluate_bandwidth, linear_grid, real_data_grid, CvMethod, CvReport,
    SelectionParams,
};
use clap::Args;
use rayon::prelude::*;

use crate::error::CliError;
use crate::io::{fmt, fmt_opt, read_dataset, CsvOut};
use crate::{ModelOpts, TimeUnit};

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Criterion that picks the bandwidth: loo, approx or kfold.
    #[arg(long, default_value = "kfold")]
    method: CvMethod,
    /// Also compute the other two criteria for the report.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed of the k-fold partition.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `default` (15 log-spaced values in [0.02, 0.5]), `real` (1 to 2
    /// hours in 10 minute steps), `lo:hi:step`, or a comma list.
    #[arg(long, default_value = "default")]
    grid: String,
    #[command(flatten)]
    model: ModelOpts,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    /// Report CSV `h,cv_naive,cv_approx,nu,aic,cv_kfold`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_grid(spec: &str, tu: TimeUnit) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse bandwidth grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid = match spec {
        "default" => default_grid(),
        "real" => real_data_grid(),
        s if s.contains(':') => {
            let parts: Vec<f64> = s.split(':').map(num).collect::<Result<_, _>>()?;
            let [lo, hi, step] = parts[..] else { return Err(bad()) };
            if !(step > 0.0 && lo > 0.0 && hi >= lo) {
                return Err(bad());
            }
            linear_grid(lo, hi, step).into_iter().map(|h| tu.ingest(h)).collect()
        }
        s => s.split(',').map(|p| num(p).map(|h| tu.ingest(h))).collect::<Result<_, _>>()?,
    };
    if grid.is_empty() || grid.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(bad());
    }
    Ok(grid)
}

pub fn run(a: SelectArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    let grid = parse_grid(&a.grid, tu)?;
    let data = read_dataset(&a.input, tu)?;
    if a.method == CvMethod::Kfold || a.all {
        if a.k < 2 || a.k > data.len() {
            return Err(CliError::Usage(format!("--k must lie in [2, {}]", data.len())));
        }
    }
    let methods: Vec<CvMethod> = if a.all {
        vec![CvMethod::Loo, CvMethod::ApproxLoo, CvMethod::Kfold]
    } else {
        vec![a.method]
    };
    let params = SelectionParams {
        family: a.model.kernel,
        degree: a.model.degree,
        optimizer: a.model.optimizer,
        k: a.k,
        seed: a.seed,
    };
    let reports: Vec<CvReport> = grid
        .par_iter()
        .map(|&h| evaluate_bandwidth(&data, h, &methods, &params))
        .collect::<Result<_, _>>()?;

    if let Some(path) = &a.out {
        let mut w = CsvOut::create(path, &["h", "cv_naive", "cv_approx", "nu", "aic", "cv_kfold"])?;
        for r in &reports {
            w.row([
                fmt(tu.emit(r.h)),
                fmt_opt(r.cv_naive),
                fmt_opt(r.cv_approx),
                fmt_opt(r.nu),
                fmt_opt(r.aic),
                fmt_opt(r.cv_kfold),
            ])?;
        }
        w.finish()?;
    }
    for r in &reports {
        if let Some(why) = &r.infeasible {
            eprintln!("betaloc: h = {} skipped: {why}", fmt(tu.emit(r.h)));
        }
        if r.nu_negative {
            eprintln!("betaloc: h = {}: negative effective degrees of freedom", fmt(tu.emit(r.h)));
        }
    }
    let best = argmax_prefer_larger(&reports, a.method)
        .ok_or_else(|| CliError::Numerical("no feasible bandwidth in the grid".into()))?;
    println!("{}", fmt(tu.emit(reports[best].h)));
    Ok(())
}
