//! Synthetic data: the toy parameter functions, Beta sampling, multilevel
//! day-by-time curves, and random subsampling of observations.
//!
//! Every random draw is keyed by `(seed, day, point)` through a ChaCha
//! stream, so generators give the same output whatever the evaluation
//! order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::betadist::ParamNat;
use crate::error::{Error, Result};
use crate::loclik::Dataset;

/// A pair of parameter functions `t -> (alpha(t), beta(t))`.
pub trait ParamCurve: Sync {
    fn params_at(&self, t: f64) -> ParamNat;
}

impl<F> ParamCurve for F
where
    F: Fn(f64) -> ParamNat + Sync,
{
    fn params_at(&self, t: f64) -> ParamNat {
        self(t)
    }
}

/// The toy model: `delta(t) = 15/4((t-1)^2 - 1/4)`,
/// `eta(t) = -15/4((t-1/2)^2 - 11/20)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToyParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyValues {
    pub delta: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Evaluate the toy parameter functions at `t`.
pub fn toy_param_functions(t: f64) -> ToyValues {
    let delta = 3.75 * ((t - 1.0).powi(2) - 0.25);
    let eta = -3.75 * ((t - 0.5).powi(2) - 0.55);
    ToyValues {
        delta,
        eta,
        alpha: delta.exp(),
        beta: eta.exp(),
    }
}

impl ParamCurve for ToyParams {
    fn params_at(&self, t: f64) -> ParamNat {
        let v = toy_param_functions(t);
        ParamNat {
            alpha: v.alpha,
            beta: v.beta,
        }
    }
}

/// Time-constant parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantParams(pub ParamNat);

impl ParamCurve for ConstantParams {
    fn params_at(&self, _t: f64) -> ParamNat {
        self.0
    }
}

/// Log parameters as one-harmonic trigonometric polynomials:
/// `delta(t) = d0 + d1 sin(2 pi t) + d2 cos(2 pi t)`, likewise `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicParams {
    pub delta: [f64; 3],
    pub eta: [f64; 3],
}

impl ParamCurve for HarmonicParams {
    fn params_at(&self, t: f64) -> ParamNat {
        let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
        let d = self.delta[0] + self.delta[1] * s + self.delta[2] * c;
        let e = self.eta[0] + self.eta[1] * s + self.eta[2] * c;
        ParamNat {
            alpha: d.exp(),
            beta: e.exp(),
        }
    }
}

/// SplitMix64 finalizer; used to derive per-individual seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the draw at `(day, point)`.
pub fn keyed_rng(seed: u64, day: u64, point: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((day << 32) ^ point);
    rng
}

/// Gamma(shape, 1) variate by Marsaglia and Tsang's squeeze method,
/// returned on the log scale so that tiny shapes cannot underflow.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        // G(a) = G(a + 1) * U^(1/a)
        let u: f64 = rng.random();
        return ln_gamma_variate(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// Gamma(shape, 1) variate.
pub fn gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    ln_gamma_variate(shape, rng).exp()
}

/// Beta variate as `G1 / (G1 + G2)` with independent gamma draws.
pub fn beta_variate<R: Rng + ?Sized>(p: ParamNat, rng: &mut R) -> f64 {
    let g1 = ln_gamma_variate(p.alpha, rng);
    let g2 = ln_gamma_variate(p.beta, rng);
    1.0 / (1.0 + (g2 - g1).exp())
}

fn keyed_beta(seed: u64, day: usize, point: usize, p: ParamNat) -> f64 {
    let mut rng = keyed_rng(seed, day as u64, point as u64);
    beta_variate(p, &mut rng)
}

/// Fixed design `t_j = j/(m-1)`, `y_j ~ Beta(alpha(t_j), beta(t_j))`.
pub fn simulate_dataset(m: usize, seed: u64, params: &dyn ParamCurve) -> Result<Dataset> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("need m >= 2, got {m}")));
    }
    let times: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
    let values: Vec<f64> = times
        .par_iter()
        .enumerate()
        .map(|(j, &t)| keyed_beta(seed, 0, j, params.params_at(t)))
        .collect();
    Dataset::new(times, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultilevelSpec {
    pub n_days: usize,
    pub per_day: usize,
    pub seed: u64,
}

/// `n_days` curves observed on a common grid of `per_day` points.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelSample {
    pub grid: Vec<f64>,
    /// `values[day][point]`.
    pub values: Vec<Vec<f64>>,
}

impl MultilevelSample {
    pub fn n_days(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }
}

/// Day grid `v/(r-1)`, or `{0}` for a single point.
pub fn day_grid(per_day: usize) -> Vec<f64> {
    match per_day {
        0 => Vec::new(),
        1 => vec![0.0],
        r => (0..r).map(|v| v as f64 / (r - 1) as f64).collect(),
    }
}

/// Independent Beta draws at every `(day, grid point)`.
pub fn simulate_multilevel(spec: &MultilevelSpec, params: &dyn ParamCurve) -> Result<MultilevelSample> {
    if spec.n_days == 0 || spec.per_day == 0 {
        return Err(Error::InvalidInput("multilevel spec needs positive counts".into()));
    }
    let grid = day_grid(spec.per_day);
    let shapes: Vec<ParamNat> = grid.iter().map(|&t| params.params_at(t)).collect();
    let values = (0..spec.n_days)
        .into_par_iter()
        .map(|day| {
            shapes
                .iter()
                .enumerate()
                .map(|(v, &p)| keyed_beta(spec.seed, day, v, p))
                .collect()
        })
        .collect();
    Ok(MultilevelSample { grid, values })
}

/// A uniform random subsample of observations, without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub data: Dataset,
    /// Selected `(day, point)` pairs in increasing order.
    pub picked: Vec<(usize, usize)>,
}

/// Draw `m` of the `(day, time)` observations uniformly without replacement.
pub fn subsample_independent(sample: &MultilevelSample, m: usize, seed: u64) -> Result<Subsample> {
    let r = sample.grid.len();
    let total = sample.n_days() * r;
    if m > total {
        return Err(Error::InvalidInput(format!(
            "cannot draw {m} observations from {total}"
        )));
    }
    if sample.values.iter().any(|d| d.len() != r) {
        return Err(Error::InvalidInput("ragged multilevel sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, total, m).into_vec();
    idx.sort_unstable();
    let picked: Vec<(usize, usize)> = idx.iter().map(|&k| (k / r, k % r)).collect();
    let times = picked.iter().map(|&(_, v)| sample.grid[v]).collect();
    let values = picked.iter().map(|&(d, v)| sample.values[d][v]).collect();
    Ok(Subsample {
        data: Dataset::new(times, values)?,
        picked,
    })
}

/// Observations not in `picked`, as `(time, value)` pairs.
pub fn complement(sample: &MultilevelSample, picked: &[(usize, usize)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(sample.total().saturating_sub(picked.len()));
    let mut it = picked.iter().peekable();
    for (d, day) in sample.values.iter().enumerate() {
        for (v, &y) in day.iter().enumerate() {
            if it.peek() == Some(&&(d, v)) {
                it.next();
            } else {
                out.push((sample.grid[v], y));
            }
        }
    }
    out
}

/// Random individual-level parameter curves for a heterogeneous cohort.
///
/// Baseline levels correspond to Beta(3, 8)-like marginals with daily
/// harmonic variation; all coefficients vary across individuals.
pub fn cohort_params(n: usize, seed: u64) -> Vec<HarmonicParams> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            let mut z = || -> f64 { rng.sample(StandardNormal) };
            HarmonicParams {
                delta: [3f64.ln() + 0.25 * z(), 0.3 * z(), 0.2 * z()],
                eta: [8f64.ln() + 0.25 * z(), 0.2 * z(), 0.3 * z()],
            }
        })
        .collect()
}

/// Multilevel samples for each individual of a cohort; individual `i` uses
/// seed `mix_seed(seed, i)`.
pub fn simulate_cohort(
    params: &[HarmonicParams],
    n_days: usize,
    per_day: usize,
    seed: u64,
) -> Result<Vec<MultilevelSample>> {
    params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            simulate_multilevel(
                &MultilevelSpec {
                    n_days,
                    per_day,
                    seed: mix_seed(seed, i as u64),
                },
                p,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn toy_values() {
        let v = toy_param_functions(0.0);
        assert_relative_eq!(v.delta, 2.8125, max_relative = 1e-15);
        assert_relative_eq!(v.alpha, 16.651_494_963_610_144, max_relative = 1e-12);
        let v = toy_param_functions(0.5);
        assert!(v.delta.abs() < 1e-15);
        assert_relative_eq!(v.alpha, 1.0);
        assert_relative_eq!(v.eta, 2.0625, max_relative = 1e-15);
        assert_relative_eq!(v.beta, 7.865_609_273_944_892, max_relative = 1e-12);
        let v = toy_param_functions(1.0);
        assert_relative_eq!(v.delta, -0.9375, max_relative = 1e-15);
        assert_relative_eq!(v.alpha, 0.391_605_626_676_799_2, max_relative = 1e-12);
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = simulate_dataset(201, 7, &ToyParams).unwrap();
        let b = simulate_dataset(201, 7, &ToyParams).unwrap();
        assert_eq!(a, b);
        let c = simulate_dataset(201, 8, &ToyParams).unwrap();
        assert_ne!(a, c);
        assert!(simulate_dataset(1, 7, &ToyParams).is_err());
    }

    #[test]
    fn multilevel_day_zero_matches_dataset() {
        let spec = MultilevelSpec { n_days: 3, per_day: 50, seed: 99 };
        let ml = simulate_multilevel(&spec, &ToyParams).unwrap();
        let ds = simulate_dataset(50, 99, &ToyParams).unwrap();
        // toy data sorted by time is already in grid order unless values tie
        let direct: Vec<f64> = ml.values[0].iter().map(|&y| crate::betadist::clamp_unit(y)).collect();
        assert_eq!(ds.values(), direct.as_slice());
        assert_eq!(ml, simulate_multilevel(&spec, &ToyParams).unwrap());
    }

    #[test]
    fn single_point_days() {
        let spec = MultilevelSpec { n_days: 10, per_day: 1, seed: 3 };
        let ml = simulate_multilevel(&spec, &ToyParams).unwrap();
        assert_eq!(ml.grid, vec![0.0]);
        assert_eq!(ml.values.len(), 10);
        assert!(ml.values.iter().all(|d| d.len() == 1 && d[0] > 0.0 && d[0] < 1.0));
    }

    #[test]
    fn subsample_full_and_deterministic() {
        let spec = MultilevelSpec { n_days: 4, per_day: 5, seed: 1 };
        let ml = simulate_multilevel(&spec, &ToyParams).unwrap();
        let all = subsample_independent(&ml, 20, 5).unwrap();
        assert_eq!(all.picked.len(), 20);
        let mut ys: Vec<f64> = all.data.values().to_vec();
        let mut expected: Vec<f64> = ml.values.iter().flatten().map(|&y| crate::betadist::clamp_unit(y)).collect();
        ys.sort_by(f64::total_cmp);
        expected.sort_by(f64::total_cmp);
        assert_eq!(ys, expected);
        assert!(complement(&ml, &all.picked).is_empty());

        let a = subsample_independent(&ml, 7, 42).unwrap();
        let b = subsample_independent(&ml, 7, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(complement(&ml, &a.picked).len(), 13);
        assert!(subsample_independent(&ml, 21, 1).is_err());
    }

    #[test]
    fn small_shape_gamma_is_positive() {
        let mut rng = keyed_rng(5, 0, 0);
        for _ in 0..1000 {
            let g = gamma_variate(0.05, &mut rng);
            assert!(g >= 0.0 && g.is_finite());
        }
    }

    #[test]
    fn gamma_moments() {
        let mut rng = keyed_rng(11, 1, 2);
        for &shape in &[0.4, 1.0, 3.5] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| gamma_variate(shape, &mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (shape / n as f64).sqrt();
            assert!((mean - shape).abs() < 4.0 * se_mean, "shape {shape}: mean {mean}");
            assert!((var - shape).abs() / shape < 0.05, "shape {shape}: var {var}");
        }
    }
}
