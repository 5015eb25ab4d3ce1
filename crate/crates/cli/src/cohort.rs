use std::path::PathBuf;

use beta_loclik::cohort::{classic_mds, cohort_fpca_summary, distance_matrix, DistanceMode, GammaCurve};
use clap::Args;
use serde::Serialize;

use crate::baseline::{check_id, sort_ids};
use crate::error::CliError;
use crate::fit::write_summary;
use crate::io::{ensure_dir, fmt, read_shape_curve, write_json, CsvOut};
use crate::TimeUnit;

#[derive(Args, Debug)]
pub struct CohortArgs {
    /// Curve CSVs with `t,alpha,beta` columns, one per individual; the file
    /// stem is the individual's id.
    #[arg(required = true, num_args = 3..)]
    curves: Vec<PathBuf>,
    /// paper_l2 (L2 distance of the concatenated curves) or exact_gram.
    #[arg(long, default_value = "paper_l2")]
    mode: DistanceMode,
    #[arg(long, default_value_t = 0.9)]
    pve: f64,
    /// Score quantiles at which each component is reconstructed.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.95")]
    quantiles: Vec<f64>,
    /// Components to summarize.
    #[arg(long, default_value_t = 3)]
    components: usize,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct Sidecar {
    version: &'static str,
    mode: String,
    ids: Vec<String>,
    pve_target: f64,
    components: usize,
    pve_summarized: f64,
    eigenvalues: Vec<f64>,
    mds_eigenvalues: Vec<f64>,
    /// Largest relative gap between the paper_l2 and exact_gram distances.
    mode_discrepancy: f64,
    clamped_extremes: Vec<String>,
}

pub fn run(a: CohortArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    if !(a.pve > 0.0 && a.pve <= 1.0) {
        return Err(CliError::Usage("--pve must lie in (0,1]".into()));
    }
    if a.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(CliError::Usage("--quantiles must lie in [0,1]".into()));
    }
    let mut named = Vec::with_capacity(a.curves.len());
    for path in &a.curves {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        check_id(&id)?;
        named.push((id, read_shape_curve(path, tu)?));
    }
    let mut ids: Vec<String> = named.iter().map(|(id, _)| id.clone()).collect();
    sort_ids(&mut ids);
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Data("two curve files share an id".into()));
    }
    let curves: Vec<GammaCurve> = ids
        .iter()
        .map(|id| {
            let (_, c) = named.iter().find(|(n, _)| n == id).expect("id from this list");
            GammaCurve::new(c.grid.clone(), c.alpha.clone(), c.beta.clone())
        })
        .collect::<Result<_, _>>()?;
    let grid = curves[0].grid.clone();
    if curves.iter().any(|c| c.grid != grid) {
        return Err(CliError::Data("all curves must share one time grid".into()));
    }

    let d = distance_matrix(&curves, a.mode)?;
    let other = distance_matrix(
        &curves,
        match a.mode {
            DistanceMode::PaperL2 => DistanceMode::ExactGram,
            DistanceMode::ExactGram => DistanceMode::PaperL2,
        },
    )?;
    let mode_discrepancy = d
        .entries
        .iter()
        .zip(&other.entries)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| (x - y).abs() / x)
        .fold(0.0, f64::max);
    let summary = cohort_fpca_summary(&curves, a.pve, &a.quantiles, a.components)?;
    let fp = &summary.fpca;
    let h = fp.n_components();
    let mds = classic_mds(&d, h)?;

    ensure_dir(&a.out_dir)?;
    let n = ids.len();
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvOut::create(&a.out_dir.join("distances.csv"), &header_refs)?;
    for i in 0..n {
        w.row(std::iter::once(ids[i].clone()).chain((0..n).map(|j| fmt(d.get(i, j)))))?;
    }
    w.finish()?;

    let mut cols = vec!["id".to_string()];
    cols.extend((1..=h).map(|k| format!("fpca_{k}")));
    cols.extend((1..=mds.coords.first().map_or(0, Vec::len)).map(|k| format!("mds_{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut w = CsvOut::create(&a.out_dir.join("scores.csv"), &col_refs)?;
    for i in 0..n {
        w.row(
            std::iter::once(ids[i].clone())
                .chain(fp.scores[i].iter().map(|&s| fmt(s)))
                .chain(mds.coords[i].iter().map(|&s| fmt(s))),
        )?;
    }
    w.finish()?;

    let mut cols = vec!["part".to_string(), "t".to_string(), "mean".to_string()];
    cols.extend((1..=h).map(|k| format!("phi_{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut w = CsvOut::create(&a.out_dir.join("eigenfunctions.csv"), &col_refs)?;
    let r = grid.len();
    for (part, offset) in [("alpha", 0), ("beta", r)] {
        for v in 0..r {
            w.row(
                [part.to_string(), fmt(tu.emit(grid[v])), fmt(fp.mean_curve[offset + v])]
                    .into_iter()
                    .chain(fp.eigenfunctions.iter().map(|phi| fmt(phi[offset + v]))),
            )?;
        }
    }
    w.finish()?;

    let mut w = CsvOut::create(&a.out_dir.join("eigenvalues.csv"), &["component", "eigenvalue", "pve", "cumulative_pve"])?;
    let total: f64 = fp.all_eigenvalues.iter().sum();
    let mut acc = 0.0;
    for (k, &lam) in fp.eigenvalues.iter().enumerate() {
        acc += lam;
        w.row([(k + 1).to_string(), fmt(lam), fmt(lam / total), fmt(acc / total)])?;
    }
    w.finish()?;

    write_summary(&a.out_dir.join("summary_mean.csv"), tu, &summary.mean_model)?;
    let mut clamped_extremes = Vec::new();
    for c in &summary.components {
        for e in &c.extremes {
            let name = format!("component_{}_q{}", c.index + 1, fmt(e.quantile));
            let mut w = CsvOut::create(
                &a.out_dir.join(format!("{name}.csv")),
                &["t", "alpha", "beta", "mean", "median", "q025", "q975"],
            )?;
            let s = &e.summary;
            for v in 0..r {
                w.row([
                    fmt(tu.emit(grid[v])),
                    fmt(e.alpha[v]),
                    fmt(e.beta[v]),
                    fmt(s.mean[v]),
                    fmt(s.median[v]),
                    fmt(s.q025[v]),
                    fmt(s.q975[v]),
                ])?;
            }
            w.finish()?;
            if e.clamped {
                clamped_extremes.push(name);
            }
        }
    }

    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        mode: a.mode.to_string(),
        ids,
        pve_target: a.pve,
        components: h,
        pve_summarized: summary.pve_summarized,
        eigenvalues: fp.eigenvalues.clone(),
        mds_eigenvalues: mds.eigenvalues.clone(),
        mode_discrepancy,
        clamped_extremes,
    };
    write_json(&a.out_dir.join("cohort.json"), &sidecar)?;
    Ok(())
}
