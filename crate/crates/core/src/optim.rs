//! Unconstrained minimizers: Nelder-Mead, BFGS, and damped Newton.
//!
//! Objectives signal an inadmissible point by returning `None`; line
//! searches treat such points as `+inf` and backtrack.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Stopping rules shared by the gradient-based methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Converged when `|grad| <= grad_rel * (1 + |f|)`.
    pub grad_rel: f64,
    pub max_iter: usize,
    /// Nelder-Mead: converged when the simplex diameter falls below this.
    pub simplex_diameter: f64,
    pub max_evals: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            grad_rel: 1e-8,
            max_iter: 500,
            simplex_diameter: 1e-10,
            max_evals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NelderMead,
    QuasiNewton,
    Newton,
}

fn grad_ok(g: &DVector<f64>, f: f64, tol: &Tolerances) -> bool {
    g.norm() <= tol.grad_rel * (1.0 + f.abs())
}

/// Nelder-Mead downhill simplex with standard coefficients.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], tol: &Tolerances) -> Minimum
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let (rho, chi, gamma, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter <= tol.simplex_diameter && values[0].is_finite() {
            converged = true;
            break;
        }
        if evals.get() >= tol.max_evals {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(rho);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(rho * chi);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[n] {
            let xc = along(rho * gamma);
            let fc = eval(&xc);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc);
            let ok = fc < values[n];
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            let v: Vec<f64> = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            values[i] = eval(&v);
            simplex[i] = v;
        }
    }

    Minimum {
        x: simplex[0].clone(),
        value: values[0],
        iterations,
        evaluations: evals.get(),
        converged,
    }
}

/// Backtracking Armijo search along `dir` from `x`; returns the accepted step.
fn backtrack<F>(
    f: &F,
    x: &DVector<f64>,
    fx: f64,
    slope: f64,
    dir: &DVector<f64>,
    evals: &mut usize,
) -> Option<(DVector<f64>, f64)>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    const C1: f64 = 1e-4;
    let mut step = 1.0;
    for _ in 0..60 {
        let trial = x + dir * step;
        *evals += 1;
        if let Some(ft) = f(trial.as_slice()).filter(|v| v.is_finite()) {
            if ft <= fx + C1 * step * slope {
                return Some((trial, ft));
            }
        }
        step *= 0.5;
    }
    None
}

/// BFGS with an Armijo backtracking line search and analytic gradient.
///
/// `fg` returns the value and gradient of the function being minimized.
pub fn bfgs<F, G>(f: F, fg: G, x0: &[f64], tol: &Tolerances) -> Minimum
where
    F: Fn(&[f64]) -> Option<f64>,
    G: Fn(&[f64]) -> Option<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut evals = 1usize;
    let Some((mut fx, mut g)) = fg(x.as_slice()) else {
        return Minimum {
            x: x0.to_vec(),
            value: f64::INFINITY,
            iterations: 0,
            evaluations: evals,
            converged: false,
        };
    };
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;
    let mut converged = grad_ok(&g, fx, tol);

    while !converged && iterations < tol.max_iter {
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let Some((x_new, _)) = backtrack(&f, &x, fx, slope, &dir, &mut evals) else {
            let trial = &x + &dir;
            evals += 1;
            if let Some((ft, gt)) = fg(trial.as_slice()) {
                if ft <= fx + 1e-12 * (1.0 + fx.abs()) && gt.norm() < g.norm() {
                    x = trial;
                    fx = ft;
                    g = gt;
                    converged = grad_ok(&g, fx, tol);
                    continue;
                }
            }
            if h_inv != DMatrix::identity(n, n) {
                h_inv = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        evals += 1;
        let Some((f_new, g_new)) = fg(x_new.as_slice()) else {
            break;
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h_inv *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H <- H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        converged = grad_ok(&g, fx, tol);
    }

    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        evaluations: evals,
        converged,
    }
}

/// Newton's method on an analytic Hessian, with Levenberg-style diagonal
/// damping whenever the Hessian is not positive definite.
pub fn newton<F, H>(f: F, fgh: H, x0: &[f64], tol: &Tolerances) -> Minimum
where
    F: Fn(&[f64]) -> Option<f64>,
    H: Fn(&[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut evals = 1usize;
    let mut iterations = 0;
    let mut converged = false;
    let mut current = fgh(x.as_slice());
    let mut fx = current.as_ref().map_or(f64::INFINITY, |c| c.0);

    while iterations < tol.max_iter {
        let Some((fv, g, hess)) = current.take() else {
            break;
        };
        fx = fv;
        if grad_ok(&g, fx, tol) {
            converged = true;
            break;
        }
        if !(g.iter().all(|v| v.is_finite()) && hess.iter().all(|v| v.is_finite())) {
            break;
        }
        iterations += 1;

        let scale = hess.diagonal().amax().max(1.0);
        let mut damping = 0.0;
        let mut dir = -g.clone() / scale;
        // at most 1e-6 .. 1e12 times the scale
        for _ in 0..20 {
            let mut m = hess.clone();
            for i in 0..n {
                m[(i, i)] += damping;
            }
            if let Some(ch) = m.cholesky() {
                dir = ch.solve(&(-&g));
                break;
            }
            damping = if damping == 0.0 { 1e-6 * scale } else { damping * 10.0 };
        }
        let slope = g.dot(&dir);

        // Undamped full step: near the optimum the value change drowns in
        // rounding, so a smaller gradient is accepted as progress too.
        if damping == 0.0 {
            let trial = &x + &dir;
            evals += 1;
            if let Some(next) = fgh(trial.as_slice()).filter(|c| c.0.is_finite()) {
                let armijo = next.0 <= fx + 1e-4 * slope;
                let flat = next.0 <= fx + 1e-12 * (1.0 + fx.abs()) && next.1.norm() < g.norm();
                if armijo || flat {
                    x = trial;
                    current = Some(next);
                    continue;
                }
            }
        }
        let Some((x_new, _)) = backtrack(&f, &x, fx, slope, &dir, &mut evals) else {
            converged = grad_ok(&g, fx, &Tolerances { grad_rel: tol.grad_rel * 10.0, ..*tol });
            break;
        };
        x = x_new;
        evals += 1;
        current = fgh(x.as_slice());
    }

    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        evaluations: evals,
        converged,
    }
}
