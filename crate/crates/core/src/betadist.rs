//! The Beta distribution in natural `(alpha, beta)` and log `(delta, eta)`
//! coordinates: log-density, score and Hessian in log coordinates, moment
//! maps, CDF and quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{beta_inc_reg, digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

/// Lower clamp applied to observed values on ingestion.
pub const Y_FLOOR: f64 = 1e-6;
/// Upper clamp applied to observed values on ingestion.
pub const Y_CEIL: f64 = 1.0 - 1e-6;
/// Largest admissible |delta| or |eta|.
pub const MAX_LOG_PARAM: f64 = 700.0;

/// Clamp an observation into `[Y_FLOOR, Y_CEIL]`.
pub fn clamp_unit(y: f64) -> f64 {
    y.clamp(Y_FLOOR, Y_CEIL)
}

/// Beta shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamNat {
    pub alpha: f64,
    pub beta: f64,
}

impl ParamNat {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::Domain(format!(
                "Beta shapes must be positive and finite, got ({alpha}, {beta})"
            )))
        }
    }

    pub fn to_log(self) -> ParamLog {
        ParamLog {
            delta: self.alpha.ln(),
            eta: self.beta.ln(),
        }
    }

    pub fn mean(self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Log shape parameters: `delta = ln alpha`, `eta = ln beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamLog {
    pub delta: f64,
    pub eta: f64,
}

impl ParamLog {
    pub fn new(delta: f64, eta: f64) -> Result<Self> {
        let p = Self { delta, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.is_finite()
            && self.eta.is_finite()
            && self.delta.abs() <= MAX_LOG_PARAM
            && self.eta.abs() <= MAX_LOG_PARAM
        {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "log parameters must be finite with magnitude <= {MAX_LOG_PARAM}, got ({}, {})",
                self.delta, self.eta
            )))
        }
    }

    pub fn to_nat(self) -> ParamNat {
        ParamNat {
            alpha: self.delta.exp(),
            beta: self.eta.exp(),
        }
    }
}

/// Mean and variance of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mu: f64,
    pub sigma2: f64,
}

/// Log-density and its first and second derivatives in `(delta, eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikDerivs {
    pub ell: f64,
    pub d_delta: f64,
    pub d_eta: f64,
    pub dd_dd: f64,
    pub dd_ee: f64,
    pub dd_de: f64,
}

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("observation must lie in (0,1), got {y}")))
    }
}

/// Beta log-density at `y` with log parameters `p`.
pub fn beta_log_density(y: f64, p: ParamLog) -> Result<f64> {
    check_y(y)?;
    p.validate()?;
    let ParamNat { alpha, beta } = p.to_nat();
    Ok(ln_gamma_unchecked(alpha + beta) - ln_gamma_unchecked(alpha) - ln_gamma_unchecked(beta)
        + (alpha - 1.0) * y.ln()
        + (beta - 1.0) * (-y).ln_1p())
}

/// Log-density plus score and Hessian entries with respect to `(delta, eta)`.
pub fn beta_loglik_derivs(y: f64, p: ParamLog) -> Result<LogLikDerivs> {
    check_y(y)?;
    p.validate()?;
    let ParamNat { alpha, beta } = p.to_nat();
    let sum = alpha + beta;
    let ln_y = y.ln();
    let ln_1my = (-y).ln_1p();

    let psi_sum = digamma_unchecked(sum);
    let tri_sum = trigamma_unchecked(sum);
    let core_delta = psi_sum - digamma_unchecked(alpha) + ln_y;
    let core_eta = psi_sum - digamma_unchecked(beta) + ln_1my;

    let d_delta = core_delta * alpha;
    let d_eta = core_eta * beta;
    Ok(LogLikDerivs {
        ell: ln_gamma_unchecked(sum) - ln_gamma_unchecked(alpha) - ln_gamma_unchecked(beta)
            + (alpha - 1.0) * ln_y
            + (beta - 1.0) * ln_1my,
        d_delta,
        d_eta,
        dd_dd: (tri_sum - trigamma_unchecked(alpha)) * alpha * alpha + d_delta,
        dd_ee: (tri_sum - trigamma_unchecked(beta)) * beta * beta + d_eta,
        dd_de: tri_sum * alpha * beta,
    })
}

/// Mean and variance of Beta(alpha, beta).
pub fn moments_map(p: ParamNat) -> MomentPair {
    let s = p.alpha + p.beta;
    let mu = p.alpha / s;
    MomentPair {
        mu,
        sigma2: mu * (1.0 - mu) / (s + 1.0),
    }
}

/// Method-of-moments inverse of [`moments_map`].
pub fn moments_invert(m: MomentPair) -> Result<ParamNat> {
    let MomentPair { mu, sigma2 } = m;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mean must lie in (0,1), got {mu}")));
    }
    let bound = mu * (1.0 - mu);
    if !(sigma2 > 0.0 && sigma2 < bound) {
        return Err(Error::InfeasibleMoments { sigma2, bound });
    }
    let k = bound / sigma2 - 1.0;
    ParamNat::new(mu * k, (1.0 - mu) * k)
}

/// CDF and quantile function of a fixed Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDist {
    pub params: ParamNat,
    ln_norm: f64,
}

impl BetaDist {
    pub fn new(params: ParamNat) -> Result<Self> {
        let params = ParamNat::new(params.alpha, params.beta)?;
        let ln_norm = ln_gamma_unchecked(params.alpha + params.beta)
            - ln_gamma_unchecked(params.alpha)
            - ln_gamma_unchecked(params.beta);
        Ok(Self { params, ln_norm })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        (self.ln_norm + (self.params.alpha - 1.0) * x.ln() + (self.params.beta - 1.0) * (-x).ln_1p())
            .exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_inc_reg(self.params.alpha, self.params.beta, x)
                .expect("validated shapes and x in (0,1)")
        }
    }

    pub fn mean(&self) -> f64 {
        self.params.mean()
    }

    /// Inverse CDF by safeguarded Newton iteration inside a shrinking bracket.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("probability must lie in (0,1), got {q}")));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = self.mean().clamp(1e-12, 1.0 - 1e-12);
        for _ in 0..400 {
            let f = self.cdf(x) - q;
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
                break;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }
}
