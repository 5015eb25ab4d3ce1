use beta_loclik::baseline::{gaynanova_estimate, pointwise_mean, pointwise_variance, BaselineOptions};
use beta_loclik::fpca::{fpca, CurveMatrix};
use beta_loclik::simulation::{cohort_params, simulate_cohort, ParamCurve};
use beta_loclik::stats::median;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn raw_opts() -> BaselineOptions {
    BaselineOptions {
        pve: 0.9,
        rescale: false,
    }
}

fn simulated(n: usize, days: usize, r: usize, seed: u64) -> (Vec<f64>, Vec<Vec<Vec<f64>>>, Vec<beta_loclik::simulation::HarmonicParams>) {
    let params = cohort_params(n, seed);
    let samples = simulate_cohort(&params, days, r, seed + 1).unwrap();
    let grid = samples[0].grid.clone();
    (grid, samples.into_iter().map(|s| s.values).collect(), params)
}

#[test]
fn recovers_alpha_on_simulated_cohort() {
    let (grid, data, params) = simulated(30, 50, 97, 2024);
    let res = gaynanova_estimate(&grid, &data, &raw_opts()).unwrap();
    assert!(res.clamp_count <= grid.len());
    let mut rel = Vec::new();
    for (est, p) in res.individuals.iter().zip(&params) {
        for (v, &t) in grid.iter().enumerate() {
            if (0.1..=0.9).contains(&t) {
                let truth = p.params_at(t).alpha;
                rel.push((est.alpha[v] - truth).abs() / truth);
            }
        }
    }
    let med = median(&rel).unwrap();
    println!("median interior relative error of alpha: {med:.4}");
    assert!(med <= 0.15);
}

#[test]
fn default_pipeline_runs_without_flags() {
    let (grid, data, _) = simulated(10, 20, 97, 7);
    let res = gaynanova_estimate(&grid, &data, &BaselineOptions::default()).unwrap();
    assert_eq!(res.clamp_count, 0);
    assert!(res.mean_components >= 1 && res.variance_components >= 1);
    for c in &res.individuals {
        assert!(c.rescale.is_some());
        assert!(c.alpha.iter().chain(&c.beta).all(|v| v.is_finite() && *v > 0.0));
    }
}

#[test]
fn relabeling_commutes() {
    let (grid, data, _) = simulated(8, 10, 25, 3);
    let res = gaynanova_estimate(&grid, &data, &raw_opts()).unwrap();
    let perm = [5, 2, 7, 0, 1, 6, 4, 3];
    let shuffled: Vec<_> = perm.iter().map(|&i| data[i].clone()).collect();
    let res_p = gaynanova_estimate(&grid, &shuffled, &raw_opts()).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(res_p.individuals[k], res.individuals[i]);
    }
}

#[test]
fn pointwise_moments_match_resummation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let days = rng.random_range(2..12);
        let r = rng.random_range(1..30);
        let data: Vec<Vec<f64>> = (0..days).map(|_| (0..r).map(|_| rng.random::<f64>()).collect()).collect();
        let mean = pointwise_mean(&data).unwrap();
        let about: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
        let var = pointwise_variance(&data, &about).unwrap();
        for v in 0..r {
            let mut s = 0.0;
            let mut ss = 0.0;
            for d in &data {
                s += d[v];
                ss += (d[v] - about[v]) * (d[v] - about[v]);
            }
            assert!((mean[v] - s / days as f64).abs() <= 1e-12);
            assert!((var[v] - ss / (days - 1) as f64).abs() <= 1e-12);
        }
    }
}

fn curve_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..8, 2usize..12).prop_flat_map(|(n, r)| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, r), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fpca_is_orthonormal_and_ordered(rows in curve_set()) {
        let r = rows[0].len();
        let grid: Vec<f64> = (0..r).map(|v| v as f64 / (r - 1) as f64).collect();
        let cm = CurveMatrix::new(grid, rows.clone()).unwrap();
        let res = fpca(&cm, 1.0).unwrap();
        prop_assert!(res.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(res.eigenvalues.iter().all(|&l| l > 0.0));
        let h = res.n_components();
        for g in 0..h {
            for k in 0..h {
                let ip: f64 = (0..r).map(|v| cm.quad_weights[v] * res.eigenfunctions[g][v] * res.eigenfunctions[k][v]).sum();
                let want = if g == k { 1.0 } else { 0.0 };
                prop_assert!((ip - want).abs() <= 1e-10);
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let rec = res.reconstruct(i);
            for v in 0..r {
                prop_assert!((rec[v] - row[v]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn fpca_ignores_row_order(rows in curve_set(), seed in any::<u64>()) {
        let r = rows[0].len();
        let grid: Vec<f64> = (0..r).map(|v| v as f64 / (r - 1) as f64).collect();
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a = fpca(&CurveMatrix::new(grid.clone(), rows.clone()).unwrap(), 0.9).unwrap();
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let b = fpca(&CurveMatrix::new(grid, shuffled).unwrap(), 0.9).unwrap();
        prop_assert_eq!(&a.eigenvalues, &b.eigenvalues);
        prop_assert_eq!(&a.eigenfunctions, &b.eigenfunctions);
        prop_assert_eq!(&a.mean_curve, &b.mean_curve);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&b.scores[k], &a.scores[i]);
        }
    }
}
