//! Bandwidth selection for the local likelihood fit.
//!
//! Three held-out criteria are available:
//!
//! * leave-one-out CV: refit without observation `j`, evaluate at `t_j`;
//! * approximate LOO: one full-sample fit per observation time, corrected
//!   by the influence quadratic form `s_j' infl(t_j) s_j` where `s_j` is the
//!   score of observation `j`; the summed correction is the effective
//!   degrees of freedom `nu`, and `AIC = -2 loglik + 2 nu`;
//! * k-fold CV over a seeded random partition.
//!
//! All criteria are sums of per-observation terms accumulated in canonical
//! (time-sorted) order, so results do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::betadist::{beta_log_density, beta_loglik_derivs};
use crate::error::{Error, Result};
use crate::kernel::{Degree, KernelFamily};
use crate::loclik::{fit_at, Dataset, FitConfig, LocalFit, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMethod {
    Loo,
    ApproxLoo,
    Kfold,
}

impl fmt::Display for CvMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvMethod::Loo => "loo",
            CvMethod::ApproxLoo => "approx_loo",
            CvMethod::Kfold => "kfold",
        })
    }
}

impl FromStr for CvMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "loo" | "naive" => Ok(CvMethod::Loo),
            "approx" | "approx_loo" => Ok(CvMethod::ApproxLoo),
            "kfold" | "k_fold" => Ok(CvMethod::Kfold),
            other => Err(Error::InvalidInput(format!("unknown CV method '{other}'"))),
        }
    }
}

/// Scores computed for one bandwidth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CvReport {
    pub h: f64,
    pub cv_naive: Option<f64>,
    pub cv_approx: Option<f64>,
    pub nu: Option<f64>,
    pub aic: Option<f64>,
    pub cv_kfold: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    /// Set when the effective degrees of freedom came out negative.
    pub nu_negative: bool,
    /// Why this bandwidth could not be scored, if it could not.
    pub infeasible: Option<String>,
}

impl CvReport {
    pub fn score(&self, method: CvMethod) -> Option<f64> {
        match method {
            CvMethod::Loo => self.cv_naive,
            CvMethod::ApproxLoo => self.cv_approx,
            CvMethod::Kfold => self.cv_kfold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub candidates: Vec<CvReport>,
    pub chosen_h: f64,
    pub method: CvMethod,
}

/// Approximate leave-one-out quantities at one bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxCv {
    pub cv_approx: f64,
    pub nu: f64,
    pub aic: f64,
    /// Full-sample log-likelihood at the fitted curve.
    pub loglik: f64,
}

fn infeasible(h: f64, e: Error) -> Error {
    match e {
        Error::InsufficientLocalData { .. } | Error::Singular(_) => Error::InfeasibleBandwidth {
            h,
            reason: e.to_string(),
        },
        other => other,
    }
}

/// Held-out log-likelihood of every observation, given a fold label per
/// canonical index. Observation `j` is scored by the fit that excludes
/// every observation sharing its label.
pub fn heldout_terms(data: &Dataset, labels: &[usize], cfg: &FitConfig) -> Result<Vec<f64>> {
    let m = data.len();
    if labels.len() != m {
        return Err(Error::InvalidInput("one fold label per observation required".into()));
    }
    let h = cfg.kernel.bandwidth;
    let n_folds = labels.iter().max().map_or(0, |&k| k + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (j, &f) in labels.iter().enumerate() {
        members[f].push(j);
    }
    let per_fold: Vec<Result<Vec<(usize, f64)>>> = members
        .par_iter()
        .filter(|idx| !idx.is_empty())
        .map(|idx| {
            let mut mask = vec![false; m];
            for &j in idx {
                mask[j] = true;
            }
            let train = data.without(&mask);
            idx.iter()
                .map(|&j| {
                    let fit = fit_at(&train, data.times()[j], cfg).map_err(|e| infeasible(h, e))?;
                    Ok((j, beta_log_density(data.values()[j], fit.params())?))
                })
                .collect()
        })
        .collect();
    let mut terms = vec![0.0; m];
    for fold in per_fold {
        for (j, v) in fold? {
            terms[j] = v;
        }
    }
    Ok(terms)
}

/// Leave-one-out cross-validated log-likelihood.
pub fn cv_naive_loo(data: &Dataset, cfg: &FitConfig) -> Result<f64> {
    if data.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "leave-one-out needs at least 5 observations, got {}",
            data.len()
        )));
    }
    let labels: Vec<usize> = (0..data.len()).collect();
    Ok(heldout_terms(data, &labels, cfg)?.iter().sum())
}

/// Seeded partition of `0..m` into `k` folds whose sizes differ by at most one.
pub fn fold_labels(m: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > m {
        return Err(Error::InvalidInput(format!("need 2 <= k <= m, got k = {k}, m = {m}")));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; m];
    for (pos, &j) in perm.iter().enumerate() {
        labels[j] = pos % k;
    }
    Ok(labels)
}

/// k-fold cross-validated log-likelihood.
pub fn cv_kfold(data: &Dataset, cfg: &FitConfig, k: usize, seed: u64) -> Result<f64> {
    let labels = fold_labels(data.len(), k, seed)?;
    Ok(heldout_terms(data, &labels, cfg)?.iter().sum())
}

/// Full-sample fits at each distinct observation time, one per observation.
fn fits_at_observations(data: &Dataset, cfg: &FitConfig) -> Result<Vec<LocalFit>> {
    let times = data.times();
    let mut distinct: Vec<f64> = times.to_vec();
    distinct.dedup();
    let fits: Vec<LocalFit> = distinct
        .par_iter()
        .map(|&t| fit_at(data, t, cfg))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in times {
        while distinct[k] != t {
            k += 1;
        }
        out.push(fits[k].clone());
    }
    Ok(out)
}

/// Approximate leave-one-out CV, effective degrees of freedom, and AIC.
pub fn cv_approx(data: &Dataset, cfg: &FitConfig) -> Result<ApproxCv> {
    let h = cfg.kernel.bandwidth;
    let fits = fits_at_observations(data, cfg).map_err(|e| infeasible(h, e))?;
    let mut loglik = 0.0;
    let mut nu = 0.0;
    for ((fit, &y), &t) in fits.iter().zip(data.values()).zip(data.times()) {
        let infl = fit.influence.ok_or_else(|| Error::InfeasibleBandwidth {
            h,
            reason: format!("J is not positive definite at t = {t}"),
        })?;
        let d = beta_loglik_derivs(y, fit.params())?;
        let (s0, s1) = (d.d_delta, d.d_eta);
        loglik += d.ell;
        nu += s0 * (infl[(0, 0)] * s0 + infl[(0, 1)] * s1) + s1 * (infl[(1, 0)] * s0 + infl[(1, 1)] * s1);
    }
    let aic = -2.0 * loglik + 2.0 * nu;
    Ok(ApproxCv {
        cv_approx: loglik - nu,
        nu,
        aic,
        loglik,
    })
}

/// Settings shared by every bandwidth in a selection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub family: KernelFamily,
    pub degree: Degree,
    pub optimizer: Optimizer,
    pub k: usize,
    pub seed: u64,
}

impl SelectionParams {
    pub fn config(&self, h: f64) -> Result<FitConfig> {
        Ok(FitConfig::new(
            crate::kernel::KernelSpec::new(self.family, h)?,
            self.degree,
            self.optimizer,
        ))
    }
}

/// Score one bandwidth with the given methods.
pub fn evaluate_bandwidth(data: &Dataset, h: f64, methods: &[CvMethod], params: &SelectionParams) -> Result<CvReport> {
    let cfg = params.config(h)?;
    let mut report = CvReport {
        h,
        ..Default::default()
    };
    for &method in methods {
        let outcome = match method {
            CvMethod::Loo => cv_naive_loo(data, &cfg).map(|v| report.cv_naive = Some(v)),
            CvMethod::ApproxLoo => cv_approx(data, &cfg).map(|a| {
                report.cv_approx = Some(a.cv_approx);
                report.nu = Some(a.nu);
                report.aic = Some(a.aic);
                report.nu_negative = a.nu < 0.0;
            }),
            CvMethod::Kfold => cv_kfold(data, &cfg, params.k, params.seed).map(|v| {
                report.cv_kfold = Some(v);
                report.folds = Some(params.k);
                report.seed = Some(params.seed);
            }),
        };
        match outcome {
            Ok(()) => {}
            Err(Error::InfeasibleBandwidth { reason, .. }) => report.infeasible = Some(reason),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Index of the best score; ties go to the larger bandwidth.
pub fn argmax_prefer_larger(reports: &[CvReport], method: CvMethod) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        let Some(s) = r.score(method).filter(|s| s.is_finite()) else {
            continue;
        };
        best = match best {
            None => Some(i),
            Some(b) => {
                let sb = reports[b].score(method).unwrap();
                if s > sb || (s == sb && r.h > reports[b].h) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Score every candidate bandwidth and pick the maximizer.
pub fn select_bandwidth(
    data: &Dataset,
    grid: &[f64],
    method: CvMethod,
    params: &SelectionParams,
) -> Result<SelectionResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth grid".into()));
    }
    let candidates: Vec<CvReport> = grid
        .par_iter()
        .map(|&h| evaluate_bandwidth(data, h, &[method], params))
        .collect::<Result<_>>()?;
    let best = argmax_prefer_larger(&candidates, method).ok_or(Error::NoFeasibleBandwidth)?;
    Ok(SelectionResult {
        chosen_h: candidates[best].h,
        candidates,
        method,
    })
}

/// 15 log-spaced bandwidths in [0.02, 0.5].
pub fn default_grid() -> Vec<f64> {
    log_grid(0.02, 0.5, 15)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// One to two hours in ten-minute steps, on a day rescaled to [0,1].
pub fn real_data_grid() -> Vec<f64> {
    (0..=6).map(|i| (60.0 + 10.0 * i as f64) / (24.0 * 60.0)).collect()
}

/// `lo, lo + step, ...` up to `hi` (inclusive, with rounding slack).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::simulation::{simulate_dataset, ToyParams};

    fn params(degree: Degree) -> SelectionParams {
        SelectionParams {
            family: KernelFamily::Gaussian,
            degree,
            optimizer: Optimizer::Newton,
            k: 5,
            seed: 1,
        }
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_labels(23, 5, 9).unwrap();
        assert_eq!(a, fold_labels(23, 5, 9).unwrap());
        let mut counts = [0usize; 5];
        for &f in &a {
            counts[f] += 1;
        }
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert!(fold_labels(5, 1, 0).is_err());
        assert!(fold_labels(5, 6, 0).is_err());
    }

    #[test]
    fn kfold_with_k_equal_m_is_loo() {
        let data = simulate_dataset(30, 4, &ToyParams).unwrap();
        let cfg = FitConfig::new(KernelSpec::gaussian(0.15).unwrap(), Degree::Linear, Optimizer::Newton);
        let loo = cv_naive_loo(&data, &cfg).unwrap();
        assert_eq!(cv_kfold(&data, &cfg, 30, 77).unwrap(), loo);
    }

    #[test]
    fn aic_identity() {
        let data = simulate_dataset(60, 2, &ToyParams).unwrap();
        for h in [0.08, 0.2] {
            let cfg = FitConfig::new(KernelSpec::gaussian(h).unwrap(), Degree::Constant, Optimizer::Newton);
            let a = cv_approx(&data, &cfg).unwrap();
            assert_eq!(-a.aic / 2.0, a.cv_approx);
            assert!(a.nu > 0.0);
        }
    }

    #[test]
    fn infeasible_bandwidth_is_reported() {
        let data = simulate_dataset(21, 4, &ToyParams).unwrap();
        let p = SelectionParams {
            family: KernelFamily::Epanechnikov,
            ..params(Degree::Constant)
        };
        // grid spacing 0.05: a window of half-width 0.02 sees a single point
        let r = evaluate_bandwidth(&data, 0.02, &[CvMethod::Loo], &p).unwrap();
        assert!(r.cv_naive.is_none() && r.infeasible.is_some());
        let err = select_bandwidth(&data, &[0.02], CvMethod::Loo, &p).unwrap_err();
        assert_eq!(err, Error::NoFeasibleBandwidth);
    }

    #[test]
    fn single_candidate_is_chosen() {
        let data = simulate_dataset(40, 3, &ToyParams).unwrap();
        let r = select_bandwidth(&data, &[0.17], CvMethod::Kfold, &params(Degree::Linear)).unwrap();
        assert_eq!(r.chosen_h, 0.17);
    }

    #[test]
    fn ties_go_to_larger_h() {
        let mk = |h: f64, s: f64| CvReport {
            h,
            cv_kfold: Some(s),
            ..Default::default()
        };
        let reports = vec![mk(0.1, 3.0), mk(0.3, 3.0), mk(0.2, 3.0), mk(0.05, 1.0)];
        assert_eq!(argmax_prefer_larger(&reports, CvMethod::Kfold), Some(1));
    }

    #[test]
    fn grids() {
        let g = default_grid();
        assert_eq!(g.len(), 15);
        assert!((g[0] - 0.02).abs() < 1e-15 && (g[14] - 0.5).abs() < 1e-12);
        let r = real_data_grid();
        assert!((r[0] - 1.0 / 24.0).abs() < 1e-15 && (r[6] - 2.0 / 24.0).abs() < 1e-15);
        let l = linear_grid(0.02, 0.30, 0.02);
        assert_eq!(l.len(), 15);
        assert!((l[14] - 0.30).abs() < 1e-12);
    }
}
