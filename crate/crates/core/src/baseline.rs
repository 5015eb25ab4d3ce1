//! Moments-based baseline: per-individual pointwise means and variances,
//! each smoothed by FPCA across individuals, then inverted to Beta shapes.
//!
//! The steps run in a fixed order: rescale to (0,1), pointwise means,
//! FPCA-smoothed means, pointwise variances about the smoothed means,
//! FPCA-smoothed variances, method-of-moments inversion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::betadist::{moments_invert, MomentPair};
use crate::error::{Error, Result};
use crate::fpca::{fpca, CurveMatrix};

/// Margin kept between a smoothed moment and its feasibility bound.
pub const CLAMP_EPS: f64 = 1e-8;

/// Affine map between raw values and the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub lo: f64,
    pub hi: f64,
}

impl Rescale {
    /// Range padded by 1% on each side: `0.99 min` and `1.01 max` for
    /// positive data.
    pub fn from_range(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::DegenerateRange(min));
        }
        Ok(Rescale {
            lo: min - 0.01 * min.abs(),
            hi: max + 0.01 * max.abs(),
        })
    }

    pub fn to_unit(&self, y: f64) -> f64 {
        (y - self.lo) / (self.hi - self.lo)
    }

    pub fn to_raw(&self, u: f64) -> f64 {
        u * (self.hi - self.lo) + self.lo
    }
}

/// Rescale one individual's day curves into (0,1). Non-finite entries are
/// ignored when finding the range and passed through unchanged.
pub fn rescale_to_unit(days: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Rescale)> {
    let finite = days.iter().flatten().copied().filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if min > max {
        return Err(Error::InvalidInput("no finite values to rescale".into()));
    }
    let s = Rescale::from_range(min, max)?;
    let scaled = days
        .iter()
        .map(|d| d.iter().map(|&v| if v.is_finite() { s.to_unit(v) } else { v }).collect())
        .collect();
    Ok((scaled, s))
}

/// Mean over days at every grid point.
pub fn pointwise_mean(days: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = days.first() else {
        return Err(Error::InvalidInput("no days".into()));
    };
    let n = days.len() as f64;
    Ok((0..first.len())
        .map(|v| days.iter().map(|d| d[v]).sum::<f64>() / n)
        .collect())
}

/// `sum_k (Y_k(t) - mean(t))^2 / (n - 1)` about a supplied mean curve.
pub fn pointwise_variance(days: &[Vec<f64>], mean: &[f64]) -> Result<Vec<f64>> {
    if days.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "variance needs at least 2 days, got {}",
            days.len()
        )));
    }
    let denom = (days.len() - 1) as f64;
    Ok(mean
        .iter()
        .enumerate()
        .map(|(v, &m)| days.iter().map(|d| (d[v] - m).powi(2)).sum::<f64>() / denom)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub pve: f64,
    /// Map each individual's values into (0,1) first. Data already on the
    /// unit interval can skip this so estimates stay on the original scale.
    pub rescale: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            pve: 0.9,
            rescale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCurve {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Grid points where the smoothed mean or variance had to be clamped.
    pub clamped: Vec<bool>,
    pub rescale: Option<Rescale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub grid: Vec<f64>,
    pub individuals: Vec<BaselineCurve>,
    pub mean_components: usize,
    pub variance_components: usize,
    pub clamp_count: usize,
}

fn smooth(grid: &[f64], rows: Vec<Vec<f64>>, pve: f64) -> Result<(Vec<Vec<f64>>, usize)> {
    let cm = CurveMatrix::new(grid.to_vec(), rows)?;
    let res = fpca(&cm, pve)?;
    Ok(((0..cm.n()).map(|i| res.reconstruct(i)).collect(), res.n_components()))
}

/// Per-individual Beta shape curves from repeated day curves on a common grid.
///
/// `individuals[i][k]` is day `k` of individual `i`, one value per grid point.
pub fn gaynanova_estimate(
    grid: &[f64],
    individuals: &[Vec<Vec<f64>>],
    opts: &BaselineOptions,
) -> Result<BaselineResult> {
    let n = individuals.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 individuals, got {n}")));
    }
    for (i, days) in individuals.iter().enumerate() {
        if days.len() < 2 {
            return Err(Error::InvalidInput(format!("individual {i} has fewer than 2 days")));
        }
        if days.iter().any(|d| d.len() != grid.len()) {
            return Err(Error::InvalidInput(format!("individual {i} is not on the common grid")));
        }
    }

    let scaled: Vec<(Vec<Vec<f64>>, Option<Rescale>)> = individuals
        .par_iter()
        .map(|days| {
            if opts.rescale {
                rescale_to_unit(days).map(|(d, s)| (d, Some(s)))
            } else {
                Ok((days.clone(), None))
            }
        })
        .collect::<Result<_>>()?;

    let raw_means: Vec<Vec<f64>> = scaled
        .par_iter()
        .map(|(d, _)| pointwise_mean(d))
        .collect::<Result<_>>()?;
    let (means, mean_components) = smooth(grid, raw_means, opts.pve)?;

    let raw_vars: Vec<Vec<f64>> = scaled
        .par_iter()
        .zip(&means)
        .map(|((d, _), m)| pointwise_variance(d, m))
        .collect::<Result<_>>()?;
    let (vars, variance_components) = smooth(grid, raw_vars, opts.pve)?;

    let individuals: Vec<BaselineCurve> = scaled
        .par_iter()
        .zip(means.par_iter().zip(&vars))
        .map(|((_, rescale), (mu, s2))| invert_curve(mu, s2, *rescale))
        .collect::<Result<_>>()?;
    let clamp_count = individuals
        .iter()
        .map(|c| c.clamped.iter().filter(|&&b| b).count())
        .sum();
    Ok(BaselineResult {
        grid: grid.to_vec(),
        individuals,
        mean_components,
        variance_components,
        clamp_count,
    })
}

fn invert_curve(mu: &[f64], s2: &[f64], rescale: Option<Rescale>) -> Result<BaselineCurve> {
    let r = mu.len();
    let mut out = BaselineCurve {
        alpha: Vec::with_capacity(r),
        beta: Vec::with_capacity(r),
        mean: Vec::with_capacity(r),
        variance: Vec::with_capacity(r),
        clamped: Vec::with_capacity(r),
        rescale,
    };
    for (&m, &v) in mu.iter().zip(s2) {
        let mc = m.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        let bound = mc * (1.0 - mc);
        let vc = v.clamp(CLAMP_EPS, bound - CLAMP_EPS);
        let p = moments_invert(MomentPair { mu: mc, sigma2: vc })?;
        out.alpha.push(p.alpha);
        out.beta.push(p.beta);
        out.mean.push(mc);
        out.variance.push(vc);
        out.clamped.push(mc != m || vc != v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_glucose_range() {
        let (scaled, s) = rescale_to_unit(&[vec![40.0, 100.0], vec![400.0, 250.0]]).unwrap();
        assert!((s.lo - 39.6).abs() < 1e-12 && (s.hi - 404.0).abs() < 1e-12);
        assert!((scaled[0][0] - 0.4 / 364.4).abs() < 1e-15);
        for (d, raw) in scaled.iter().zip([[40.0, 100.0], [400.0, 250.0]]) {
            for (u, y) in d.iter().zip(raw) {
                assert!(*u > 0.0 && *u < 1.0);
                assert!((s.to_raw(*u) - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_values_are_degenerate() {
        assert!(matches!(
            rescale_to_unit(&[vec![5.0, 5.0], vec![5.0, 5.0]]),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn variance_about_supplied_mean() {
        let days = vec![vec![0.2; 4], vec![0.5; 4], vec![0.8; 4]];
        let v = pointwise_variance(&days, &[0.5; 4]).unwrap();
        assert!(v.iter().all(|x| (x - 0.09).abs() < 1e-15));
        let same = vec![vec![0.3, 0.4], vec![0.3, 0.4]];
        let m = pointwise_mean(&same).unwrap();
        assert_eq!(pointwise_variance(&same, &m).unwrap(), vec![0.0, 0.0]);
        assert!(pointwise_variance(&same[..1], &m).is_err());
    }

    #[test]
    fn zero_variance_is_clamped_and_counted() {
        let grid = vec![0.0, 0.5, 1.0];
        let ind = vec![vec![0.3, 0.4, 0.5]; 2];
        let res = gaynanova_estimate(
            &grid,
            &[ind.clone(), ind],
            &BaselineOptions {
                pve: 0.9,
                rescale: false,
            },
        )
        .unwrap();
        assert_eq!(res.clamp_count, 6);
        assert!(res.individuals[0].alpha.iter().all(|a| a.is_finite() && *a > 0.0));
    }

    #[test]
    fn duplicated_individual_gives_identical_estimates() {
        let grid: Vec<f64> = (0..9).map(|v| v as f64 / 8.0).collect();
        let days: Vec<Vec<f64>> = (0..4)
            .map(|k| grid.iter().map(|t| 0.3 + 0.1 * t + 0.02 * (k as f64 - 1.5) * (1.0 + t)).collect())
            .collect();
        let res = gaynanova_estimate(&grid, &vec![days; 3], &BaselineOptions::default()).unwrap();
        assert_eq!(res.individuals[0], res.individuals[1]);
        assert_eq!(res.individuals[0], res.individuals[2]);
    }
}
