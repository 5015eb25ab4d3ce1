//! Cohort-level analysis of fitted shape curves.
//!
//! Each individual's `(alpha(t), beta(t))` pair is concatenated into a single
//! curve `gamma`. Distances between individuals integrate a pointwise
//! Aitchison distance between Beta densities over the day; classic metric
//! scaling on those distances, or FPCA of the `gamma` curves, gives a
//! low-dimensional map of the cohort.
//!
//! Within the Beta family the squared Aitchison distance is the quadratic
//! form `da^2 + db^2 + 2 da db (1 - pi^2/6)`, with the Gram matrix of the
//! centered sufficient statistics `log U`, `log(1 - U)` under Uniform(0,1).
//! The `PaperL2` mode drops the cross term and integrates `da^2 + db^2`,
//! which is exactly the squared L2 distance between `gamma` curves; the
//! `ExactGram` mode keeps it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::betadist::{beta_log_density, BetaDist, ParamLog, ParamNat};
use crate::error::{Error, Result};
use crate::fpca::{fpca, trapezoid_weights, CurveMatrix, FpcaResult};
use crate::loclik::FittedCurve;
use crate::stats::quantile_type7;

pub use crate::stats::{paired_t_test, TTest};

/// Cov(log U, log(1 - U)) for U ~ Uniform(0,1).
pub const SUFF_STAT_COV: f64 = 1.0 - PI * PI / 6.0;

/// Floor applied to reconstructed shape parameters.
pub const SHAPE_FLOOR: f64 = 1e-6;

/// An individual's `alpha(t)` followed by `beta(t)` on a common day grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub grid: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GammaCurve {
    pub fn new(grid: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || alpha.len() != grid.len() || beta.len() != grid.len() {
            return Err(Error::InvalidInput("alpha and beta must match the grid".into()));
        }
        if alpha.iter().chain(&beta).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("shape parameters must be positive and finite".into()));
        }
        Ok(GammaCurve { grid, alpha, beta })
    }

    pub fn from_fitted(curve: &FittedCurve) -> Result<Self> {
        Self::new(curve.grid.clone(), curve.alpha.clone(), curve.beta.clone())
    }

    /// Concatenated values, length `2r`.
    pub fn values(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }

    /// Concatenated domain: the beta half is shifted by the day length.
    pub fn concat_grid(&self) -> Vec<f64> {
        let span = self.grid[self.grid.len() - 1] - self.grid[0];
        let shift = if span > 0.0 { span } else { 1.0 };
        self.grid
            .iter()
            .copied()
            .chain(self.grid.iter().map(|t| t + shift))
            .collect()
    }

    pub fn params(&self) -> Vec<ParamNat> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&alpha, &beta)| ParamNat { alpha, beta })
            .collect()
    }
}

/// Squared Aitchison distance between two Beta densities.
pub fn aitchison_beta_sq(p1: ParamNat, p2: ParamNat) -> f64 {
    let da = p1.alpha - p2.alpha;
    let db = p1.beta - p2.beta;
    da * da + db * db + 2.0 * da * db * SUFF_STAT_COV
}

/// Aitchison distance between two Beta densities.
pub fn aitchison_beta(p1: ParamNat, p2: ParamNat) -> f64 {
    aitchison_beta_sq(p1, p2).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    PaperL2,
    ExactGram,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::PaperL2 => "paper_l2",
            DistanceMode::ExactGram => "exact_gram",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "paper_l2" | "l2" => Ok(DistanceMode::PaperL2),
            "exact_gram" | "exact" => Ok(DistanceMode::ExactGram),
            other => Err(Error::InvalidInput(format!("unknown distance mode '{other}'"))),
        }
    }
}

/// Squared integrated Aitchison distance between two shape curves on a
/// common grid, by the trapezoid rule.
pub fn integrated_aitchison(grid: &[f64], c1: &[ParamNat], c2: &[ParamNat], mode: DistanceMode) -> Result<f64> {
    if c1.len() != grid.len() || c2.len() != grid.len() {
        return Err(Error::InvalidInput("curves are not on the common grid".into()));
    }
    let w = trapezoid_weights(grid);
    Ok(c1
        .iter()
        .zip(c2)
        .zip(&w)
        .map(|((a, b), w)| {
            let d2 = match mode {
                DistanceMode::PaperL2 => (a.alpha - b.alpha).powi(2) + (a.beta - b.beta).powi(2),
                DistanceMode::ExactGram => aitchison_beta_sq(*a, *b),
            };
            w * d2
        })
        .sum())
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub n: usize,
    /// Row-major `n x n` entries.
    pub entries: Vec<f64>,
    /// Whether entries come from a metric.
    pub metric: bool,
}

impl DistanceMatrix {
    pub fn new(n: usize, entries: Vec<f64>, metric: bool) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput("distance matrix must be n x n".into()));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidInput("distance matrix diagonal must be zero".into()));
            }
            for j in 0..i {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if !(a >= 0.0) || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::InvalidInput(format!(
                        "distance matrix not symmetric non-negative at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, entries, metric })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Pairwise integrated Aitchison distances (square roots of the integrals).
pub fn distance_matrix(curves: &[GammaCurve], mode: DistanceMode) -> Result<DistanceMatrix> {
    let n = curves.len();
    let Some(first) = curves.first() else {
        return Ok(DistanceMatrix {
            n: 0,
            entries: Vec::new(),
            metric: true,
        });
    };
    if curves.iter().any(|c| c.grid != first.grid) {
        return Err(Error::InvalidInput("curves are not on a common grid".into()));
    }
    let params: Vec<Vec<ParamNat>> = curves.iter().map(GammaCurve::params).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return Ok(0.0);
                    }
                    // evaluate each pair once, in a fixed orientation
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    integrated_aitchison(&first.grid, &params[a], &params[b], mode).map(|d2| d2.max(0.0).sqrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    DistanceMatrix::new(n, rows.concat(), true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsResult {
    /// `coords[i][k]`.
    pub coords: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Set when fewer positive eigenvalues than requested dimensions exist.
    pub truncated: bool,
}

/// Classic (Torgerson) metric scaling.
pub fn classic_mds(d: &DistanceMatrix, dims: usize) -> Result<MdsResult> {
    let n = d.n;
    if n == 0 {
        return Err(Error::InvalidInput("empty distance matrix".into()));
    }
    let mut b = DMatrix::<f64>::from_fn(n, n, |i, j| -0.5 * d.get(i, j).powi(2));
    let row_mean: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += grand - row_mean[i] - row_mean[j];
        }
    }
    let eig = SymmetricEigen::new(b);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let positive: Vec<usize> = idx
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > 1e-12 * scale && eig.eigenvalues[k] > 0.0)
        .collect();
    let kept = dims.min(positive.len());
    let mut coords = vec![vec![0.0; kept]; n];
    let mut eigenvalues = Vec::with_capacity(kept);
    for (c, &k) in positive[..kept].iter().enumerate() {
        let lam = eig.eigenvalues[k];
        let u = eig.eigenvectors.column(k);
        let mut big = 0;
        for i in 1..n {
            if u[i].abs() > u[big].abs() {
                big = i;
            }
        }
        let sign = if u[big] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][c] = sign * u[i] * lam.sqrt();
        }
        eigenvalues.push(lam);
    }
    Ok(MdsResult {
        coords,
        eigenvalues,
        truncated: kept < dims,
    })
}

/// FPCA of the concatenated curves, each half weighted by the day's
/// trapezoid weights.
pub fn gamma_fpca(curves: &[GammaCurve], pve: f64) -> Result<FpcaResult> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidInput("empty cohort".into()));
    };
    if curves.iter().any(|c| c.grid != first.grid) {
        return Err(Error::InvalidInput("curves are not on a common grid".into()));
    }
    let w = trapezoid_weights(&first.grid);
    let weights: Vec<f64> = w.iter().chain(&w).copied().collect();
    let cm = CurveMatrix::with_weights(
        first.concat_grid(),
        curves.iter().map(GammaCurve::values).collect(),
        weights,
    )?;
    fpca(&cm, pve)
}

/// Mean, median and central 95% interval of Beta distributions along a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCurves {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
}

impl SummaryCurves {
    pub fn from_params(grid: &[f64], params: &[ParamNat]) -> Result<Self> {
        let rows: Vec<[f64; 4]> = params
            .iter()
            .map(|&p| {
                let d = BetaDist::new(p)?;
                Ok([d.mean(), d.quantile(0.5)?, d.quantile(0.025)?, d.quantile(0.975)?])
            })
            .collect::<Result<_>>()?;
        Ok(SummaryCurves {
            grid: grid.to_vec(),
            mean: rows.iter().map(|r| r[0]).collect(),
            median: rows.iter().map(|r| r[1]).collect(),
            q025: rows.iter().map(|r| r[2]).collect(),
            q975: rows.iter().map(|r| r[3]).collect(),
        })
    }
}

/// The model reconstructed at one extreme score of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeModel {
    pub quantile: f64,
    pub score: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub summary: SummaryCurves,
    /// Whether any reconstructed shape had to be floored.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub index: usize,
    pub eigenvalue: f64,
    /// Share of total variance of this component.
    pub pve: f64,
    /// `phi` split into its alpha and beta halves.
    pub direction_alpha: Vec<f64>,
    pub direction_beta: Vec<f64>,
    pub extremes: Vec<ExtremeModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub fpca: FpcaResult,
    /// The model at the mean `gamma` curve.
    pub mean_model: SummaryCurves,
    pub components: Vec<ComponentSummary>,
    /// Cumulative share of variance of the summarized components.
    pub pve_summarized: f64,
}

fn model_from_gamma(grid: &[f64], gamma: &[f64]) -> Result<(Vec<f64>, Vec<f64>, SummaryCurves, bool)> {
    let r = grid.len();
    let mut clamped = false;
    let mut floor = |v: f64| {
        if v < SHAPE_FLOOR || !v.is_finite() {
            clamped = true;
            SHAPE_FLOOR
        } else {
            v
        }
    };
    let alpha: Vec<f64> = gamma[..r].iter().map(|&v| floor(v)).collect();
    let beta: Vec<f64> = gamma[r..].iter().map(|&v| floor(v)).collect();
    let params: Vec<ParamNat> = alpha
        .iter()
        .zip(&beta)
        .map(|(&alpha, &beta)| ParamNat { alpha, beta })
        .collect();
    let summary = SummaryCurves::from_params(grid, &params)?;
    Ok((alpha, beta, summary, clamped))
}

/// Principal directions of the cohort and the models at extreme scores.
///
/// At most `max_components` leading components are summarized; for each,
/// `mean + q phi` is reconstructed at every requested empirical score
/// quantile `q`.
pub fn cohort_fpca_summary(
    curves: &[GammaCurve],
    pve: f64,
    quantiles: &[f64],
    max_components: usize,
) -> Result<CohortSummary> {
    if curves.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "cohort summary needs at least 3 individuals, got {}",
            curves.len()
        )));
    }
    let res = gamma_fpca(curves, pve)?;
    let grid = &curves[0].grid;
    let r = grid.len();
    let total: f64 = res.all_eigenvalues.iter().sum();
    let (_, _, mean_model, _) = model_from_gamma(grid, &res.mean_curve)?;
    let n_comp = res.n_components().min(max_components);
    let components: Vec<ComponentSummary> = (0..n_comp)
        .into_par_iter()
        .map(|h| {
            let scores: Vec<f64> = res.scores.iter().map(|s| s[h]).collect();
            let phi = &res.eigenfunctions[h];
            let extremes = quantiles
                .iter()
                .map(|&q| {
                    let score = quantile_type7(&scores, q)?;
                    let gamma: Vec<f64> = res.mean_curve.iter().zip(phi).map(|(m, p)| m + score * p).collect();
                    let (alpha, beta, summary, clamped) = model_from_gamma(grid, &gamma)?;
                    Ok(ExtremeModel {
                        quantile: q,
                        score,
                        alpha,
                        beta,
                        summary,
                        clamped,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(ComponentSummary {
                index: h,
                eigenvalue: res.eigenvalues[h],
                pve: res.eigenvalues[h] / total,
                direction_alpha: phi[..r].to_vec(),
                direction_beta: phi[r..].to_vec(),
                extremes,
            })
        })
        .collect::<Result<_>>()?;
    let pve_summarized = if total > 0.0 {
        res.eigenvalues[..n_comp].iter().sum::<f64>() / total
    } else {
        1.0
    };
    Ok(CohortSummary {
        fpca: res,
        mean_model,
        components,
        pve_summarized,
    })
}

/// Mean log-likelihood of held-out `(t, y)` pairs under a parameter function.
pub fn mean_loglik_with<F>(params_at: F, holdout: &[(f64, f64)]) -> Result<f64>
where
    F: Fn(f64) -> ParamLog,
{
    if holdout.is_empty() {
        return Err(Error::InvalidInput("empty holdout set".into()));
    }
    let mut sum = 0.0;
    for &(t, y) in holdout {
        sum += beta_log_density(y, params_at(t))?;
    }
    Ok(sum / holdout.len() as f64)
}

/// Mean out-of-sample log-likelihood of a fitted curve, interpolating the
/// log-parameters linearly between grid points.
pub fn oos_mean_loglik(model: &FittedCurve, holdout: &[(f64, f64)]) -> Result<f64> {
    let (lo, hi) = (model.grid[0], model.grid[model.grid.len() - 1]);
    let slack = 1e-12 * (1.0 + hi.abs());
    if let Some(&(t, _)) = holdout.iter().find(|(t, _)| *t < lo - slack || *t > hi + slack) {
        return Err(Error::InvalidInput(format!(
            "holdout time {t} lies outside the model grid [{lo}, {hi}]"
        )));
    }
    mean_loglik_with(|t| model.params_at(t), holdout)
}
