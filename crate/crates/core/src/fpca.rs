//! Discretized functional principal component analysis.
//!
//! Curves observed on a common grid are treated as vectors; inner products
//! use trapezoid quadrature weights `w`, so the covariance operator becomes
//! `W^{1/2} C W^{1/2}` and eigenfunctions are recovered as `W^{-1/2} u`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are treated as zero.
const EIGEN_REL_TOL: f64 = 1e-12;
const ROUNDING_FLOOR: f64 = 1e-24;

/// Trapezoid weights for a strictly increasing grid; a single point gets weight 1.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let r = grid.len();
    if r == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; r];
    for v in 0..r - 1 {
        let half = 0.5 * (grid[v + 1] - grid[v]);
        w[v] += half;
        w[v + 1] += half;
    }
    w
}

/// Trapezoid integral of `f` sampled on `grid`.
pub fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    trapezoid_weights(grid).iter().zip(f).map(|(w, y)| w * y).sum()
}

/// `n` curves on a common grid, with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMatrix {
    pub grid: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub quad_weights: Vec<f64>,
}

impl CurveMatrix {
    /// Curves on a strictly increasing grid with trapezoid weights.
    pub fn new(grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        let quad_weights = trapezoid_weights(&grid);
        Self::with_weights(grid, rows, quad_weights)
    }

    /// Curves with caller-supplied positive quadrature weights.
    pub fn with_weights(grid: Vec<f64>, rows: Vec<Vec<f64>>, quad_weights: Vec<f64>) -> Result<Self> {
        let r = grid.len();
        if quad_weights.len() != r || quad_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("need one positive weight per grid point".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != r {
                return Err(Error::InvalidInput(format!(
                    "curve {i} has {} values on a grid of {r}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("curve {i} has missing values")));
            }
        }
        Ok(CurveMatrix {
            grid,
            rows,
            quad_weights,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn r(&self) -> usize {
        self.grid.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaResult {
    pub mean_curve: Vec<f64>,
    /// `eigenfunctions[h][v]`, orthonormal under the quadrature weights.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `scores[i][h]`.
    pub scores: Vec<Vec<f64>>,
    /// Proportion of variance explained by the retained components.
    pub pve: f64,
    /// Every positive eigenvalue, retained or not.
    pub all_eigenvalues: Vec<f64>,
}

impl FpcaResult {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Mean plus the retained components for curve `i`.
    pub fn reconstruct(&self, i: usize) -> Vec<f64> {
        self.curve_from_scores(&self.scores[i])
    }

    /// Mean plus `sum_h s_h phi_h`.
    pub fn curve_from_scores(&self, s: &[f64]) -> Vec<f64> {
        let mut out = self.mean_curve.clone();
        for (phi, &sh) in self.eigenfunctions.iter().zip(s) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += sh * p;
            }
        }
        out
    }

    /// Cumulative proportion of variance after each retained component.
    pub fn cumulative_pve(&self) -> Vec<f64> {
        let total: f64 = self.all_eigenvalues.iter().sum();
        let mut acc = 0.0;
        self.eigenvalues
            .iter()
            .map(|l| {
                acc += l;
                if total > 0.0 {
                    acc / total
                } else {
                    1.0
                }
            })
            .collect()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// FPCA keeping the fewest components whose cumulative share of variance
/// reaches `pve_target`.
///
/// Sums over curves run in a canonical row order, so permuting the input
/// rows permutes the scores and leaves everything else bit-identical.
pub fn fpca(curves: &CurveMatrix, pve_target: f64) -> Result<FpcaResult> {
    let n = curves.n();
    let r = curves.r();
    if n < 2 {
        return Err(Error::InvalidInput(format!("FPCA needs at least 2 curves, got {n}")));
    }
    if !(pve_target > 0.0 && pve_target <= 1.0) {
        return Err(Error::InvalidInput(format!("pve target must lie in (0,1], got {pve_target}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lex_cmp(&curves.rows[i], &curves.rows[j]));

    // shifted by a reference curve so identical rows give an exact mean
    let reference = &curves.rows[order[0]];
    let mut mean = vec![0.0; r];
    for &i in &order {
        for ((m, v), c) in mean.iter_mut().zip(&curves.rows[i]).zip(reference) {
            *m += v - c;
        }
    }
    for (m, c) in mean.iter_mut().zip(reference) {
        *m = c + *m / n as f64;
    }

    let sqrt_w: Vec<f64> = curves.quad_weights.iter().map(|w| w.sqrt()).collect();
    // rows of W^{1/2}-scaled centered curves, in canonical order
    let mut x = DMatrix::<f64>::zeros(n, r);
    for (k, &i) in order.iter().enumerate() {
        for v in 0..r {
            x[(k, v)] = (curves.rows[i][v] - mean[v]) * sqrt_w[v];
        }
    }
    let cov = (x.transpose() * &x) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    // rounding in the mean leaves variance of order (eps |mean|)^2 even for
    // identical curves; anything that small is not a component
    let mean_sq: f64 = (0..r).map(|v| curves.quad_weights[v] * mean[v] * mean[v]).sum();
    let floor = (EIGEN_REL_TOL * eig.eigenvalues[idx[0]]).max(ROUNDING_FLOOR * mean_sq);
    let positive: Vec<usize> = idx
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > floor && eig.eigenvalues[k] > 0.0)
        .collect();
    let all_eigenvalues: Vec<f64> = positive.iter().map(|&k| eig.eigenvalues[k]).collect();
    let total: f64 = all_eigenvalues.iter().sum();

    let mut h = 0;
    let mut acc = 0.0;
    while h < all_eigenvalues.len() && acc < total * (pve_target - 1e-12) {
        acc += all_eigenvalues[h];
        h += 1;
    }
    let pve = if total > 0.0 { acc / total } else { 1.0 };

    let eigenfunctions: Vec<Vec<f64>> = positive[..h]
        .iter()
        .map(|&k| {
            let u = eig.eigenvectors.column(k);
            let mut phi: Vec<f64> = (0..r).map(|v| u[v] / sqrt_w[v]).collect();
            // sign convention: the largest-magnitude entry is positive
            let mut big = 0;
            for v in 1..r {
                if phi[v].abs() > phi[big].abs() {
                    big = v;
                }
            }
            if phi[big] < 0.0 {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
            phi
        })
        .collect();

    let scores = curves
        .rows
        .iter()
        .map(|row| {
            eigenfunctions
                .iter()
                .map(|phi| {
                    (0..r)
                        .map(|v| curves.quad_weights[v] * (row[v] - mean[v]) * phi[v])
                        .sum()
                })
                .collect()
        })
        .collect();

    Ok(FpcaResult {
        mean_curve: mean,
        eigenfunctions,
        eigenvalues: all_eigenvalues[..h].to_vec(),
        scores,
        pve,
        all_eigenvalues,
    })
}
