//! Two-parameter local likelihood for Beta observations.
//!
//! Around a center `t0` the log parameters are approximated by polynomials
//! in `t - t0`: `delta(t) = a0 [+ a1 (t - t0)]`, `eta(t) = b0 [+ b1 (t - t0)]`.
//! The kernel-weighted log-likelihood is maximized over `(a, b)`; the
//! intercepts are the local estimates of `(delta(t0), eta(t0))`.
//!
//! Coefficients are stacked as `[a..., b...]`, so for the linear degree the
//! intercepts sit at indices 0 and 2, for the constant degree at 0 and 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::betadist::{beta_loglik_derivs, clamp_unit, moments_invert, MomentPair, ParamLog};
use crate::error::{Error, Result};
use crate::kernel::{build_design, Degree, KernelSpec, LocalDesign};
use crate::optim::{self, Method, Tolerances};

/// Observations `(t_j, y_j)`, kept sorted by `(t, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Dataset {
    pub const MIN_LEN: usize = 4;

    /// Validates, clamps values into the open unit interval, and sorts.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "times and values differ in length ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.len() < Self::MIN_LEN {
            return Err(Error::InvalidInput(format!(
                "need at least {} observations, got {}",
                Self::MIN_LEN,
                times.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidInput(format!("time {t} outside [0,1]")));
        }
        if let Some(y) = values.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {y}")));
        }
        let values = values.into_iter().map(clamp_unit).collect();
        Ok(Self::from_parts_sorted(times, values))
    }

    fn from_parts_sorted(times: Vec<f64>, values: Vec<f64>) -> Self {
        let mut pairs: Vec<(f64, f64)> = times.into_iter().zip(values).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (times, values) = pairs.into_iter().unzip();
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Observations whose canonical index is not excluded. No minimum size.
    pub fn without(&self, excluded: &[bool]) -> Dataset {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .zip(excluded)
            .filter(|(_, &skip)| !skip)
            .map(|((&t, &y), _)| (t, y))
            .unzip();
        Dataset { times, values }
    }

    /// Shift every time by `c`, skipping the [0,1] check.
    pub fn shifted(&self, c: f64) -> Dataset {
        Dataset {
            times: self.times.iter().map(|t| t + c).collect(),
            values: self.values.clone(),
        }
    }
}

/// Local polynomial coefficients for `delta` (`a`) and `eta` (`b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefVec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CoefVec {
    pub fn zeros(degree: Degree) -> Self {
        let p = degree.n_coef();
        Self {
            a: vec![0.0; p],
            b: vec![0.0; p],
        }
    }

    pub fn intercepts(degree: Degree, a0: f64, b0: f64) -> Self {
        let mut c = Self::zeros(degree);
        c.a[0] = a0;
        c.b[0] = b0;
        c
    }

    pub fn degree(&self) -> Degree {
        if self.a.len() == 1 {
            Degree::Constant
        } else {
            Degree::Linear
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let p = x.len() / 2;
        Self {
            a: x[..p].to_vec(),
            b: x[p..].to_vec(),
        }
    }

    /// Log parameters at offset `u = t - t0`.
    #[inline]
    pub fn at(&self, u: f64) -> (f64, f64) {
        let mut d = self.a[0];
        let mut e = self.b[0];
        if self.a.len() > 1 {
            d += self.a[1] * u;
            e += self.b[1] * u;
        }
        (d, e)
    }

    fn scale_slopes(&self, factor: f64) -> Self {
        let mut c = self.clone();
        if c.a.len() > 1 {
            c.a[1] *= factor;
            c.b[1] *= factor;
        }
        c
    }
}

/// Value, gradient and negative Hessian (J) of the local log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub neg_hessian: DMatrix<f64>,
}

fn check_aligned(data: &Dataset, design: &LocalDesign, coef: &CoefVec) -> Result<()> {
    if data.len() != design.len() {
        return Err(Error::InvalidInput(format!(
            "design has {} rows but data has {} observations",
            design.len(),
            data.len()
        )));
    }
    if coef.a.len() != design.n_coef() || coef.b.len() != design.n_coef() {
        return Err(Error::InvalidInput("coefficient length does not match degree".into()));
    }
    Ok(())
}

/// Local log-likelihood value only.
pub fn local_value(data: &Dataset, design: &LocalDesign, coef: &CoefVec) -> Result<f64> {
    check_aligned(data, design, coef)?;
    let mut value = 0.0;
    for (j, &w) in design.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (d, e) = coef.at(design.offsets[j]);
        value += w * crate::betadist::beta_log_density(data.values[j], ParamLog { delta: d, eta: e })?;
    }
    Ok(value)
}

/// Local log-likelihood with gradient and J.
pub fn local_objective(data: &Dataset, design: &LocalDesign, coef: &CoefVec) -> Result<ObjectiveEval> {
    check_aligned(data, design, coef)?;
    let p = design.n_coef();
    let mut value = 0.0;
    let mut gradient = DVector::zeros(2 * p);
    let mut jm = DMatrix::zeros(2 * p, 2 * p);
    for (j, &w) in design.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let u = design.offsets[j];
        let (d, e) = coef.at(u);
        let der = beta_loglik_derivs(data.values[j], ParamLog { delta: d, eta: e })?;
        value += w * der.ell;
        let x = design.row(j);
        for r in 0..p {
            gradient[r] += w * der.d_delta * x[r];
            gradient[p + r] += w * der.d_eta * x[r];
            for c in 0..p {
                let xx = w * x[r] * x[c];
                jm[(r, c)] -= der.dd_dd * xx;
                jm[(p + r, p + c)] -= der.dd_ee * xx;
                jm[(r, p + c)] -= der.dd_de * xx;
                jm[(p + r, c)] -= der.dd_de * xx;
            }
        }
    }
    Ok(ObjectiveEval {
        value,
        gradient,
        neg_hessian: jm,
    })
}

/// Starting coefficients from kernel-weighted moments of the local values.
pub fn warm_start(data: &Dataset, design: &LocalDesign) -> CoefVec {
    let total: f64 = design.total_weight();
    let degree = design.degree;
    if !(total > 0.0) {
        return CoefVec::zeros(degree);
    }
    let mean = design
        .weights
        .iter()
        .zip(&data.values)
        .map(|(w, y)| w * y)
        .sum::<f64>()
        / total;
    let var = design
        .weights
        .iter()
        .zip(&data.values)
        .map(|(w, y)| w * (y - mean) * (y - mean))
        .sum::<f64>()
        / total;
    // variances at rounding level count as zero
    if var <= 1e-10 * mean * (1.0 - mean) {
        return CoefVec::zeros(degree);
    }
    match moments_invert(MomentPair { mu: mean, sigma2: var }) {
        Ok(p) => {
            let l = p.to_log();
            if l.validate().is_ok() {
                CoefVec::intercepts(degree, l.delta, l.eta)
            } else {
                CoefVec::zeros(degree)
            }
        }
        Err(_) => CoefVec::zeros(degree),
    }
}

/// Optimizer used for the local maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    NelderMead,
    QuasiNewton,
    Newton,
}

impl From<Optimizer> for Method {
    fn from(o: Optimizer) -> Self {
        match o {
            Optimizer::NelderMead => Method::NelderMead,
            Optimizer::QuasiNewton => Method::QuasiNewton,
            Optimizer::Newton => Method::Newton,
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::NelderMead => "nelder_mead",
            Optimizer::QuasiNewton => "quasi_newton",
            Optimizer::Newton => "newton",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nelder_mead" | "nm" => Ok(Optimizer::NelderMead),
            "quasi_newton" | "bfgs" => Ok(Optimizer::QuasiNewton),
            "newton" | "nlm" => Ok(Optimizer::Newton),
            other => Err(Error::InvalidInput(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Everything that determines a local fit besides the data and the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub kernel: KernelSpec,
    pub degree: Degree,
    pub optimizer: Optimizer,
}

impl FitConfig {
    pub fn new(kernel: KernelSpec, degree: Degree, optimizer: Optimizer) -> Self {
        Self {
            kernel,
            degree,
            optimizer,
        }
    }

    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        Ok(Self {
            kernel: KernelSpec::new(self.kernel.family, h)?,
            ..*self
        })
    }
}

/// Result of maximizing the local likelihood at one center.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub center: f64,
    pub coef: CoefVec,
    pub delta_hat: f64,
    pub eta_hat: f64,
    /// Negative Hessian of the local log-likelihood at `coef`.
    pub j_matrix: DMatrix<f64>,
    /// `K(0)` times the intercept block of `J^-1`; `None` when J is not
    /// positive definite.
    pub influence: Option<Matrix2<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub gradient_norm: f64,
}

impl LocalFit {
    pub fn params(&self) -> ParamLog {
        ParamLog {
            delta: self.delta_hat,
            eta: self.eta_hat,
        }
    }

    /// True when Cholesky factorization of J succeeds.
    pub fn j_positive_definite(&self) -> bool {
        self.j_matrix.clone().cholesky().is_some()
    }
}

/// Influence matrix `K(0) (e_a0, e_b0)' J^-1 (e_a0, e_b0)`.
pub fn influence_from_j(j_matrix: &DMatrix<f64>, k0: f64) -> Option<Matrix2<f64>> {
    let p = j_matrix.nrows() / 2;
    let inv = j_matrix.clone().cholesky()?.inverse();
    Some(Matrix2::new(inv[(0, 0)], inv[(0, p)], inv[(p, 0)], inv[(p, p)]) * k0)
}

fn scaled_design(design: &LocalDesign) -> LocalDesign {
    let h = design.kernel.bandwidth;
    LocalDesign {
        offsets: design.offsets.iter().map(|u| u / h).collect(),
        ..design.clone()
    }
}

/// Maximize the local likelihood at `t0`, starting from weighted moments.
pub fn fit_at(data: &Dataset, t0: f64, cfg: &FitConfig) -> Result<LocalFit> {
    fit_at_from(data, t0, cfg, None)
}

/// Maximize the local likelihood at `t0` from an optional starting point.
pub fn fit_at_from(data: &Dataset, t0: f64, cfg: &FitConfig, start: Option<&CoefVec>) -> Result<LocalFit> {
    let design = build_design(t0, &data.times, &cfg.kernel, cfg.degree)?;
    let start = match start {
        Some(s) if s.degree() == cfg.degree => s.clone(),
        _ => warm_start(data, &design),
    };
    maximize(data, &design, cfg.optimizer, &start)
}

fn maximize(data: &Dataset, design: &LocalDesign, optimizer: Optimizer, start: &CoefVec) -> Result<LocalFit> {
    let h = design.kernel.bandwidth;
    // Optimize over slopes expressed per bandwidth unit; this keeps the
    // problem well conditioned for every optimizer.
    let scaled = scaled_design(design);
    let x0 = start.scale_slopes(h).to_vec();
    let tol = Tolerances::default();

    let neg_value = |x: &[f64]| local_value(data, &scaled, &CoefVec::from_slice(x)).ok().map(|v| -v);
    let neg_value_grad = |x: &[f64]| {
        local_objective(data, &scaled, &CoefVec::from_slice(x))
            .ok()
            .map(|e| (-e.value, -e.gradient))
    };
    let neg_value_grad_hess = |x: &[f64]| {
        local_objective(data, &scaled, &CoefVec::from_slice(x))
            .ok()
            .map(|e| (-e.value, -e.gradient, e.neg_hessian))
    };

    let min = match optimizer {
        Optimizer::NelderMead => {
            let steps: Vec<f64> = x0.iter().map(|v| 0.1 + 0.05 * v.abs()).collect();
            optim::nelder_mead(neg_value, &x0, &steps, &tol)
        }
        Optimizer::QuasiNewton => optim::bfgs(neg_value, neg_value_grad, &x0, &tol),
        Optimizer::Newton => optim::newton(neg_value, neg_value_grad_hess, &x0, &tol),
    };

    let coef = CoefVec::from_slice(&min.x).scale_slopes(1.0 / h);
    let eval = local_objective(data, design, &coef)?;
    let influence = influence_from_j(&eval.neg_hessian, design.kernel.peak());
    let gradient_norm = eval.gradient.norm();
    Ok(LocalFit {
        center: design.center,
        delta_hat: coef.a[0],
        eta_hat: coef.b[0],
        coef,
        j_matrix: eval.neg_hessian,
        influence,
        converged: min.converged,
        iterations: min.iterations,
        objective: eval.value,
        gradient_norm,
    })
}

/// How grid points obtain their starting values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Each point starts from its own weighted moments; points run in parallel.
    Independent,
    /// Each point starts from the previous point's solution; sequential.
    Chained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    /// Optimizer hit its limit; the best iterate is kept.
    NotConverged,
    /// Filled by linear interpolation of `(delta, eta)` between converged neighbors.
    Interpolated,
}

/// Estimated parameter functions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCurve {
    pub grid: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub fits: Vec<Option<LocalFit>>,
    pub status: Vec<PointStatus>,
    pub config: FitConfig,
}

impl FittedCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.status.iter().filter(|s| **s != PointStatus::Converged).count()
    }

    /// `(delta, eta)` at `t`, linearly interpolated on the grid and held
    /// constant beyond its ends.
    pub fn params_at(&self, t: f64) -> ParamLog {
        let (d, e) = interp_pair(&self.grid, &self.delta, &self.eta, t);
        ParamLog { delta: d, eta: e }
    }
}

/// Linear interpolation of two series sharing `grid`, held constant beyond its ends.
pub fn interp_pair(grid: &[f64], a: &[f64], b: &[f64], t: f64) -> (f64, f64) {
    let n = grid.len();
    if n == 1 || t <= grid[0] {
        return (a[0], b[0]);
    }
    if t >= grid[n - 1] {
        return (a[n - 1], b[n - 1]);
    }
    let k = grid.partition_point(|&g| g <= t).min(n - 1);
    let (g0, g1) = (grid[k - 1], grid[k]);
    let w = if g1 > g0 { (t - g0) / (g1 - g0) } else { 0.0 };
    (a[k - 1] + w * (a[k] - a[k - 1]), b[k - 1] + w * (b[k] - b[k - 1]))
}

/// Regular grid of `n` points on `[0,1]`.
pub fn regular_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Fit the local likelihood at every grid point.
pub fn fit_curve(data: &Dataset, grid: &[f64], cfg: &FitConfig, mode: StartMode) -> Result<FittedCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite grid point".into()));
    }
    let results: Vec<Result<LocalFit>> = match mode {
        StartMode::Independent => grid.par_iter().map(|&t| fit_at(data, t, cfg)).collect(),
        StartMode::Chained => {
            let mut out = Vec::with_capacity(grid.len());
            let mut prev: Option<LocalFit> = None;
            for &t in grid {
                let start = prev.as_ref().filter(|f| f.converged).map(|f| {
                    let (d, e) = f.coef.at(t - f.center);
                    let mut c = f.coef.clone();
                    c.a[0] = d;
                    c.b[0] = e;
                    c
                });
                let r = fit_at_from(data, t, cfg, start.as_ref());
                prev = r.as_ref().ok().cloned();
                out.push(r);
            }
            out
        }
    };
    assemble_curve(grid, results, cfg)
}

fn assemble_curve(grid: &[f64], results: Vec<Result<LocalFit>>, cfg: &FitConfig) -> Result<FittedCurve> {
    let n = grid.len();
    let mut delta = vec![f64::NAN; n];
    let mut eta = vec![f64::NAN; n];
    let mut status = vec![PointStatus::Converged; n];
    let mut fits = Vec::with_capacity(n);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(fit) => {
                delta[i] = fit.delta_hat;
                eta[i] = fit.eta_hat;
                if !fit.converged {
                    status[i] = PointStatus::NotConverged;
                }
                fits.push(Some(fit));
            }
            Err(e @ Error::Domain(_)) => return Err(e),
            Err(Error::InvalidInput(msg)) => return Err(Error::InvalidInput(msg)),
            Err(_) => {
                status[i] = PointStatus::NotConverged;
                fits.push(None);
            }
        }
    }

    let converged: Vec<usize> = (0..n).filter(|&i| status[i] == PointStatus::Converged).collect();
    let mut failed = Vec::new();
    for i in 0..n {
        if status[i] == PointStatus::Converged {
            continue;
        }
        let left = converged.iter().rev().find(|&&k| k < i).copied();
        let right = converged.iter().find(|&&k| k > i).copied();
        match (left, right) {
            (Some(l), Some(r)) => {
                let w = (grid[i] - grid[l]) / (grid[r] - grid[l]);
                delta[i] = delta[l] + w * (delta[r] - delta[l]);
                eta[i] = eta[l] + w * (eta[r] - eta[l]);
                status[i] = PointStatus::Interpolated;
            }
            _ => {
                if !(delta[i].is_finite() && eta[i].is_finite()) {
                    failed.push(grid[i]);
                }
            }
        }
    }
    if !failed.is_empty() {
        return Err(Error::PartialCurve { centers: failed });
    }

    Ok(FittedCurve {
        grid: grid.to_vec(),
        alpha: delta.iter().map(|d| d.exp()).collect(),
        beta: eta.iter().map(|e| e.exp()).collect(),
        delta,
        eta,
        fits,
        status,
        config: *cfg,
    })
}

/// Log-likelihood of every observation under the fitted curve evaluated at
/// the observation times.
pub fn pointwise_loglik(curve: &FittedCurve, data: &Dataset) -> Result<Vec<f64>> {
    data.times
        .iter()
        .zip(&data.values)
        .map(|(&t, &y)| crate::betadist::beta_log_density(y, curve.params_at(t)))
        .collect()
}
