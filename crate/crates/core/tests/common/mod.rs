#![allow(dead_code)]

//! Numerical oracles shared by the integration tests.

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh nodes on (0, 1) as `(x, 1 - x, weight)`, both coordinates
/// computed without cancellation so endpoint singularities are resolved.
pub fn tanh_sinh_nodes(step: f64, t_max: f64) -> Vec<(f64, f64, f64)> {
    let n = (t_max / step).ceil() as i64;
    (-n..=n)
        .map(|k| {
            let t = k as f64 * step;
            let s = FRAC_PI_2 * t.sinh();
            // x = 1 / (1 + e^{-2s}), 1 - x = 1 / (1 + e^{2s})
            let x = 1.0 / (1.0 + (-2.0 * s).exp());
            let xc = 1.0 / (1.0 + (2.0 * s).exp());
            let w = step * FRAC_PI_2 * t.cosh() / (2.0 * s.cosh().powi(2));
            (x, xc, w)
        })
        .filter(|&(x, xc, _)| x > 0.0 && xc > 0.0 && x < 1.0)
        .collect()
}

/// Integral of `f(x, 1 - x)` over (0, 1).
pub fn integrate_unit<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    integrate_unit_with(f, 1.0 / 64.0)
}

pub fn integrate_unit_with<F: Fn(f64, f64) -> f64>(f: F, step: f64) -> f64 {
    tanh_sinh_nodes(step, 3.2)
        .iter()
        .map(|&(x, xc, w)| w * f(x, xc))
        .sum()
}

/// Integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    (b - a) * integrate_unit(|x, _| f(a + (b - a) * x))
}

/// Central difference of `f` at `x` with step `h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(1e-300)
}

/// Relative error with an absolute floor for values near zero.
pub fn rel_err_floor(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Smallest Frobenius residual `||A R - B||` over orthogonal `R`, scaled by
/// `||B||` (orthogonal Procrustes).
pub fn procrustes_residual(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    use nalgebra::DMatrix;
    let n = a.len();
    let k = a.first().map_or(0, Vec::len);
    let am = DMatrix::from_fn(n, k, |i, j| a[i][j]);
    let bm = DMatrix::from_fn(n, k, |i, j| b[i][j]);
    let svd = (am.transpose() * &bm).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    (am * r - &bm).norm() / bm.norm().max(1e-300)
}
