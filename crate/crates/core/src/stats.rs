//! Small statistical helpers: sample quantiles, the one-sample
//! Kolmogorov-Smirnov test against Uniform(0,1), and the paired t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::student_t_two_sided_p;

/// Sample quantile with linear interpolation between order statistics
/// (`x[floor(h)] + (h - floor(h)) (x[floor(h)+1] - x[floor(h)])`,
/// `h = (n-1) p`), the default in R and NumPy.
pub fn quantile_type7(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("quantile level must lie in [0,1], got {p}")));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(x.len() - 1);
    Ok(x[lo] + (h - lo as f64) * (x[hi] - x[lo]))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile_type7(values, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `u` against Uniform(0,1). The p-value uses the
/// asymptotic distribution with Stephens' small-sample correction
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
pub fn ks_uniform(u: &[f64]) -> Result<KsResult> {
    if u.is_empty() {
        return Err(Error::InvalidInput("KS test of an empty sample".into()));
    }
    let mut x = u.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let v = v.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - v).max(v - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    /// Mean of `x - y`.
    pub mean_diff: f64,
}

impl TTest {
    pub fn mean_diff_sign(&self) -> f64 {
        self.mean_diff.signum()
    }
}

/// Two-sided paired t-test on `x - y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTest> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("paired samples must have equal length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateTest);
    }
    let t_stat = mean / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    Ok(TTest {
        t_stat,
        df,
        p_value: student_t_two_sided_p(t_stat, df)?,
        mean_diff: mean,
    })
}
