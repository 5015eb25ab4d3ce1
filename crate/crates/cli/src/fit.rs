use std::path::PathBuf;

use beta_loclik::betadist::ParamNat;
use beta_loclik::cohort::SummaryCurves;
use beta_loclik::kernel::KernelSpec;
use beta_loclik::loclik::{fit_curve, regular_grid, FitConfig, PointStatus, StartMode};
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::io::{fmt, read_dataset, write_json, write_text, CsvOut};
use crate::{svg, ModelOpts, TimeUnit};

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Observations as `t,y`.
    #[arg(long, short)]
    input: PathBuf,
    /// Bandwidth, in the units of `--time-unit`.
    #[arg(long)]
    h: f64,
    #[command(flatten)]
    model: ModelOpts,
    /// Number of evaluation points on [0,1].
    #[arg(long, default_value_t = 101)]
    grid_size: usize,
    /// Warm-start each grid point from its left neighbour (sequential).
    #[arg(long)]
    chained: bool,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    /// Curve CSV `t,alpha,beta,delta,eta,converged`.
    #[arg(long, short)]
    out: PathBuf,
    /// JSON sidecar (default: the output path with a .json extension).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Mean, median and 95% band of the fitted distributions.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'static str,
    input: String,
    time_unit: &'static str,
    bandwidth: f64,
    kernel: String,
    degree: String,
    optimizer: String,
    start_mode: StartMode,
    grid_size: usize,
    flagged: usize,
    points: Vec<PointRecord<'a>>,
}

#[derive(Serialize)]
struct PointRecord<'a> {
    t: f64,
    status: &'a PointStatus,
    iterations: Option<usize>,
}

pub fn run(a: FitArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    if a.grid_size == 0 {
        return Err(CliError::Usage("--grid-size must be positive".into()));
    }
    let data = read_dataset(&a.input, tu)?;
    let kernel = KernelSpec::new(a.model.kernel, tu.ingest(a.h)).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = FitConfig::new(kernel, a.model.degree, a.model.optimizer);
    let mode = if a.chained { StartMode::Chained } else { StartMode::Independent };
    let curve = fit_curve(&data, &regular_grid(a.grid_size), &cfg, mode)?;

    let mut w = CsvOut::create(&a.out, &["t", "alpha", "beta", "delta", "eta", "converged"])?;
    for v in 0..curve.len() {
        w.row([
            fmt(tu.emit(curve.grid[v])),
            fmt(curve.alpha[v]),
            fmt(curve.beta[v]),
            fmt(curve.delta[v]),
            fmt(curve.eta[v]),
            (curve.status[v] == PointStatus::Converged).to_string(),
        ])?;
    }
    w.finish()?;

    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        input: a.input.display().to_string(),
        time_unit: match tu {
            TimeUnit::Unit => "unit",
            TimeUnit::Hours24 => "hours24",
        },
        bandwidth: a.h,
        kernel: a.model.kernel.to_string(),
        degree: a.model.degree.to_string(),
        optimizer: a.model.optimizer.to_string(),
        start_mode: mode,
        grid_size: a.grid_size,
        flagged: curve.flagged(),
        points: (0..curve.len())
            .map(|v| PointRecord {
                t: tu.emit(curve.grid[v]),
                status: &curve.status[v],
                iterations: curve.fits[v].as_ref().map(|f| f.iterations),
            })
            .collect(),
    };
    let sidecar_path = a.sidecar.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_json(&sidecar_path, &sidecar)?;

    if let Some(path) = &a.summary {
        let params: Vec<ParamNat> = curve
            .alpha
            .iter()
            .zip(&curve.beta)
            .map(|(&alpha, &beta)| ParamNat { alpha, beta })
            .collect();
        let s = SummaryCurves::from_params(&curve.grid, &params)?;
        write_summary(path, tu, &s)?;
    }
    if let Some(path) = &a.svg {
        let t: Vec<f64> = curve.grid.iter().map(|&t| tu.emit(t)).collect();
        let title = format!("{} fit, h = {}", a.model.degree, a.h);
        write_text(path, &svg::line_plot(&title, &t, &[("alpha", &curve.alpha), ("beta", &curve.beta)]))?;
    }
    if curve.flagged() > 0 {
        let bad: Vec<String> = (0..curve.len())
            .filter(|&v| curve.status[v] != PointStatus::Converged)
            .map(|v| fmt(tu.emit(curve.grid[v])))
            .collect();
        eprintln!("betaloc: {} grid points flagged: {}", bad.len(), bad.join(" "));
    }
    Ok(())
}

pub fn write_summary(path: &std::path::Path, tu: TimeUnit, s: &SummaryCurves) -> Result<(), CliError> {
    let mut w = CsvOut::create(path, &["t", "mean", "median", "q025", "q975"])?;
    for v in 0..s.grid.len() {
        w.row([
            fmt(tu.emit(s.grid[v])),
            fmt(s.mean[v]),
            fmt(s.median[v]),
            fmt(s.q025[v]),
            fmt(s.q975[v]),
        ])?;
    }
    w.finish()
}
