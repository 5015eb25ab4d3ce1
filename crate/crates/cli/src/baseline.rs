use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use beta_loclik::baseline::{gaynanova_estimate, BaselineOptions, Rescale};
use beta_loclik::loclik::interp_pair;
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::io::{ensure_dir, fmt, write_json, CsvOut, Table};
use crate::TimeUnit;

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Multilevel CSV `id,day,t,y`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    pve: f64,
    /// Skip the per-individual map into (0,1) (data already on the unit interval).
    #[arg(long)]
    no_rescale: bool,
    /// Linearly interpolate every day onto this many regular points when
    /// the observation grids differ.
    #[arg(long)]
    interpolate: Option<usize>,
    #[arg(long, value_enum, default_value = "unit")]
    time_unit: TimeUnit,
    /// One `<id>.csv` per individual plus `baseline.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Individual ids in canonical order: numeric when every id is an integer.
pub fn sort_ids(ids: &mut [String]) {
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<i64>().unwrap());
    } else {
        ids.sort();
    }
}

pub fn check_id(id: &str) -> Result<(), CliError> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') {
        return Err(CliError::Data(format!("id '{id}' must be alphanumeric (with - _ .)")));
    }
    Ok(())
}

type Days = BTreeMap<String, Vec<(f64, f64)>>;

fn read_multilevel(path: &Path, tu: TimeUnit) -> Result<BTreeMap<String, Days>, CliError> {
    let table = Table::read(path)?;
    let ids = if table.has("id") {
        table.strings("id")?
    } else {
        vec!["0".to_string(); table.len()]
    };
    let days = table.strings("day")?;
    let t = table.floats("t")?;
    let y = table.floats("y")?;
    let mut out: BTreeMap<String, Days> = BTreeMap::new();
    for i in 0..table.len() {
        check_id(&ids[i])?;
        out.entry(ids[i].clone())
            .or_default()
            .entry(days[i].clone())
            .or_default()
            .push((tu.ingest(t[i]), y[i]));
    }
    for days in out.values_mut() {
        for obs in days.values_mut() {
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Sidecar {
    version: &'static str,
    pve: f64,
    rescale: bool,
    interpolated: bool,
    grid_size: usize,
    mean_components: usize,
    variance_components: usize,
    clamp_count: usize,
    individuals: Vec<IndividualRecord>,
}

#[derive(Serialize)]
struct IndividualRecord {
    id: String,
    days: usize,
    range: Option<Rescale>,
    clamped: usize,
}

pub fn run(a: BaselineArgs) -> Result<(), CliError> {
    let tu = a.time_unit;
    if !(a.pve > 0.0 && a.pve <= 1.0) {
        return Err(CliError::Usage("--pve must lie in (0,1]".into()));
    }
    let data = read_multilevel(&a.input, tu)?;
    let mut ids: Vec<String> = data.keys().cloned().collect();
    sort_ids(&mut ids);

    let all_days: Vec<&Vec<(f64, f64)>> = ids.iter().flat_map(|id| data[id].values()).collect();
    let first: Vec<f64> = all_days[0].iter().map(|p| p.0).collect();
    let common = all_days.iter().all(|d| d.len() == first.len() && d.iter().zip(&first).all(|(p, t)| p.0 == *t));
    let (grid, curves): (Vec<f64>, Vec<Vec<Vec<f64>>>) = if common && a.interpolate.is_none() {
        let curves = ids
            .iter()
            .map(|id| data[id].values().map(|d| d.iter().map(|p| p.1).collect()).collect())
            .collect();
        (first, curves)
    } else {
        let Some(r) = a.interpolate else {
            return Err(CliError::Data(
                "days are not observed on a common grid; pass --interpolate <points>".into(),
            ));
        };
        if r < 2 {
            return Err(CliError::Usage("--interpolate needs at least 2 points".into()));
        }
        let lo = all_days.iter().flat_map(|d| d.iter().map(|p| p.0)).fold(f64::INFINITY, f64::min);
        let hi = all_days.iter().flat_map(|d| d.iter().map(|p| p.0)).fold(f64::NEG_INFINITY, f64::max);
        let grid: Vec<f64> = (0..r).map(|v| lo + (hi - lo) * v as f64 / (r - 1) as f64).collect();
        let curves = ids
            .iter()
            .map(|id| {
                data[id]
                    .values()
                    .map(|d| {
                        let t: Vec<f64> = d.iter().map(|p| p.0).collect();
                        let y: Vec<f64> = d.iter().map(|p| p.1).collect();
                        grid.iter().map(|&g| interp_pair(&t, &y, &y, g).0).collect()
                    })
                    .collect()
            })
            .collect();
        (grid, curves)
    };
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Data("repeated time within a day".into()));
    }

    let opts = BaselineOptions {
        pve: a.pve,
        rescale: !a.no_rescale,
    };
    let res = gaynanova_estimate(&grid, &curves, &opts)?;

    ensure_dir(&a.out_dir)?;
    for (id, c) in ids.iter().zip(&res.individuals) {
        let mut w = CsvOut::create(
            &a.out_dir.join(format!("{id}.csv")),
            &["t", "alpha", "beta", "mean", "variance", "clamped"],
        )?;
        for v in 0..grid.len() {
            w.row([
                fmt(tu.emit(grid[v])),
                fmt(c.alpha[v]),
                fmt(c.beta[v]),
                fmt(c.mean[v]),
                fmt(c.variance[v]),
                c.clamped[v].to_string(),
            ])?;
        }
        w.finish()?;
    }
    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        pve: a.pve,
        rescale: opts.rescale,
        interpolated: a.interpolate.is_some(),
        grid_size: grid.len(),
        mean_components: res.mean_components,
        variance_components: res.variance_components,
        clamp_count: res.clamp_count,
        individuals: ids
            .iter()
            .zip(&res.individuals)
            .map(|(id, c)| IndividualRecord {
                id: id.clone(),
                days: data[id].len(),
                range: c.rescale,
                clamped: c.clamped.iter().filter(|&&b| b).count(),
            })
            .collect(),
    };
    write_json(&a.out_dir.join("baseline.json"), &sidecar)?;
    if res.clamp_count > 0 {
        eprintln!("betaloc: {} grid values clamped before inversion", res.clamp_count);
    }
    Ok(())
}
