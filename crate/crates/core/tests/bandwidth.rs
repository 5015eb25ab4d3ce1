use beta_loclik::bandwidth::{
    cv_approx, cv_kfold, cv_naive_loo, default_grid, select_bandwidth, CvMethod, SelectionParams,
};
use beta_loclik::betadist::{beta_log_density, beta_loglik_derivs, ParamLog};
use beta_loclik::kernel::{Degree, KernelFamily, KernelSpec};
use beta_loclik::loclik::{fit_at, Dataset, FitConfig, Optimizer};
use beta_loclik::simulation::{simulate_dataset, ToyParams};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::digamma;

fn cfg(h: f64, degree: Degree) -> FitConfig {
    FitConfig::new(KernelSpec::gaussian(h).unwrap(), degree, Optimizer::Newton)
}

/// Weighted two-parameter Beta MLE in (log alpha, log beta).
fn weighted_beta_mle(y: &[f64], w: &[f64]) -> (f64, f64) {
    let tw: f64 = w.iter().sum();
    let s1 = y.iter().zip(w).map(|(v, w)| w * v.ln()).sum::<f64>() / tw;
    let s2 = y.iter().zip(w).map(|(v, w)| w * (1.0 - v).ln()).sum::<f64>() / tw;
    let tg = |x: f64| (digamma(x + 1e-6 * x) - digamma(x - 1e-6 * x)) / (2e-6 * x);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    for _ in 0..500 {
        let g1 = digamma(a + b) - digamma(a) + s1;
        let g2 = digamma(a + b) - digamma(b) + s2;
        let (t_ab, t_a, t_b) = (tg(a + b), tg(a), tg(b));
        let (h11, h12, h22) = (t_ab - t_a, t_ab, t_ab - t_b);
        let det = h11 * h22 - h12 * h12;
        let da = (h22 * g1 - h12 * g2) / det;
        let db = (h11 * g2 - h12 * g1) / det;
        a = (a - da).max(a / 10.0);
        b = (b - db).max(b / 10.0);
        if (da.abs() + db.abs()) < 1e-14 * (a + b) {
            break;
        }
    }
    (a.ln(), b.ln())
}

#[test]
fn loo_on_five_points_matches_direct_recomputation() {
    let times = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    let values = vec![0.21, 0.68, 0.35, 0.9, 0.47];
    let data = Dataset::new(times.clone(), values.clone()).unwrap();
    let h = 5.0;
    let ours = cv_naive_loo(&data, &cfg(h, Degree::Constant)).unwrap();
    let mut oracle = 0.0;
    for j in 0..5 {
        let (mut y, mut w) = (Vec::new(), Vec::new());
        for k in (0..5).filter(|&k| k != j) {
            let u = (times[k] - times[j]) / h;
            y.push(values[k]);
            w.push((-0.5 * u * u).exp());
        }
        let (d, e) = weighted_beta_mle(&y, &w);
        let (a, b) = (d.exp(), e.exp());
        let yj = values[j];
        let ln_beta = statrs::function::beta::ln_beta(a, b);
        oracle += (a - 1.0) * yj.ln() + (b - 1.0) * (1.0 - yj).ln() - ln_beta;
    }
    assert!((ours - oracle).abs() < 1e-9, "{ours} vs {oracle}");
}

#[test]
fn removing_a_duplicated_observation_matches_the_influence_prediction() {
    // with an exact copy left behind, the held-out term differs from the
    // full-fit term by the influence quadratic form up to second order
    let base = simulate_dataset(250, 8, &ToyParams).unwrap();
    let times: Vec<f64> = base.times().iter().flat_map(|&t| [t, t]).collect();
    let values: Vec<f64> = base.values().iter().flat_map(|&y| [y, y]).collect();
    let data = Dataset::new(times, values).unwrap();
    let c = cfg(10.0, Degree::Constant);
    for j in (0..500).step_by(5) {
        let t = data.times()[j];
        let y = data.values()[j];
        let fit = fit_at(&data, t, &c).unwrap();
        let full = beta_log_density(y, fit.params()).unwrap();
        let s = beta_loglik_derivs(y, fit.params()).unwrap();
        let i = fit.influence.unwrap();
        let q = s.d_delta * (i[(0, 0)] * s.d_delta + i[(0, 1)] * s.d_eta)
            + s.d_eta * (i[(1, 0)] * s.d_delta + i[(1, 1)] * s.d_eta);
        let mut mask = vec![false; data.len()];
        mask[j] = true;
        let held = beta_log_density(y, fit_at(&data.without(&mask), t, &c).unwrap().params()).unwrap();
        assert!((full - held - q).abs() <= 1e-3, "j={j}: {full} - {held} vs {q}");
    }
}

#[test]
fn effective_df_at_large_bandwidth_is_the_global_trace() {
    let data = simulate_dataset(200, 21, &ToyParams).unwrap();
    let a = cv_approx(&data, &cfg(10.0, Degree::Constant)).unwrap();
    assert!(a.nu <= 4.0 && a.nu > 0.0, "nu = {}", a.nu);

    // global model: nu = sum_j s_j' I^{-1} s_j at the unweighted MLE
    let w = vec![1.0; data.len()];
    let (d, e) = weighted_beta_mle(data.values(), &w);
    let p = ParamLog { delta: d, eta: e };
    let derivs: Vec<_> = data.values().iter().map(|&y| beta_loglik_derivs(y, p).unwrap()).collect();
    let i11: f64 = derivs.iter().map(|v| -v.dd_dd).sum();
    let i22: f64 = derivs.iter().map(|v| -v.dd_ee).sum();
    let i12: f64 = derivs.iter().map(|v| -v.dd_de).sum();
    let det = i11 * i22 - i12 * i12;
    let trace: f64 = derivs
        .iter()
        .map(|v| (i22 * v.d_delta * v.d_delta - 2.0 * i12 * v.d_delta * v.d_eta + i11 * v.d_eta * v.d_eta) / det)
        .sum();
    assert!((a.nu - trace).abs() / trace < 0.05, "nu {} vs global trace {trace}", a.nu);
}

#[test]
fn loo_is_pessimistic_relative_to_the_full_sample() {
    let c = cfg(0.12, Degree::Linear);
    let mut ok = 0;
    for seed in 0..50 {
        let data = simulate_dataset(100, 500 + seed, &ToyParams).unwrap();
        let loo = cv_naive_loo(&data, &c).unwrap();
        let full = cv_approx(&data, &c).unwrap().loglik;
        if loo <= full {
            ok += 1;
        }
    }
    assert!(ok >= 48, "{ok}/50");
}

#[test]
fn scores_ignore_input_row_order() {
    let data = simulate_dataset(60, 13, &ToyParams).unwrap();
    let mut rows: Vec<(f64, f64)> = data.times().iter().copied().zip(data.values().iter().copied()).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let (t, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let shuffled = Dataset::new(t, y).unwrap();
    let c = cfg(0.15, Degree::Linear);
    assert_eq!(cv_naive_loo(&data, &c).unwrap(), cv_naive_loo(&shuffled, &c).unwrap());
    assert_eq!(cv_approx(&data, &c).unwrap(), cv_approx(&shuffled, &c).unwrap());
    assert_eq!(cv_kfold(&data, &c, 5, 3).unwrap(), cv_kfold(&shuffled, &c, 5, 3).unwrap());
}

#[test]
fn scores_do_not_depend_on_thread_count() {
    let data = simulate_dataset(80, 17, &ToyParams).unwrap();
    let params = SelectionParams {
        family: KernelFamily::Gaussian,
        degree: Degree::Linear,
        optimizer: Optimizer::Newton,
        k: 5,
        seed: 4,
    };
    let grid = [0.05, 0.1, 0.2];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            [CvMethod::Loo, CvMethod::ApproxLoo, CvMethod::Kfold].map(|m| select_bandwidth(&data, &grid, m, &params).unwrap())
        })
    };
    assert_eq!(run(1), run(8));
}

/// Number of replicate datasets (out of 20) on which two fold seeds pick
/// bandwidths at most one grid step apart.
fn kfold_agreement(degree: Degree) -> usize {
    let grid = default_grid();
    (0..20)
        .filter(|&rep| {
            let data = simulate_dataset(201, 7000 + rep, &ToyParams).unwrap();
            let pick = |seed: u64| {
                let p = SelectionParams {
                    family: KernelFamily::Gaussian,
                    degree,
                    optimizer: Optimizer::Newton,
                    k: 5,
                    seed,
                };
                let h = select_bandwidth(&data, &grid, CvMethod::Kfold, &p).unwrap().chosen_h;
                grid.iter().position(|&g| g == h).unwrap() as i64
            };
            (pick(1) - pick(2)).abs() <= 1
        })
        .count()
}

#[test]
fn kfold_selection_is_stable_across_seeds() {
    // thresholds frozen from the first run (19 and 17 of 20)
    let constant = kfold_agreement(Degree::Constant);
    let linear = kfold_agreement(Degree::Linear);
    assert!(constant >= 18, "local constant: {constant}/20");
    assert!(linear >= 16, "local linear: {linear}/20");
}
