//! Kernels, localization weights, and local polynomial designs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum total kernel weight for a well-posed local problem.
pub const MIN_TOTAL_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
}

impl KernelFamily {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KernelFamily::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelFamily::Gaussian),
            "epanechnikov" | "epan" => Ok(KernelFamily::Epanechnikov),
            other => Err(Error::InvalidInput(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Kernel family together with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if bandwidth.is_finite() && bandwidth > 0.0 {
            Ok(Self { family, bandwidth })
        } else {
            Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")))
        }
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, bandwidth)
    }

    /// Weight of an observation at offset `t - t0`.
    pub fn weight(&self, offset: f64) -> f64 {
        self.family.eval(offset / self.bandwidth)
    }

    /// K(0).
    pub fn peak(&self) -> f64 {
        self.family.eval(0.0)
    }
}

/// Evaluate the kernel of `spec` at the standardized distance `u`.
pub fn kernel_eval(spec: &KernelSpec, u: f64) -> f64 {
    spec.family.eval(u)
}

/// Degree of the local polynomial approximating each parameter function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Degree {
    Constant,
    Linear,
}

impl Degree {
    /// Number of coefficients per parameter function.
    pub fn n_coef(self) -> usize {
        match self {
            Degree::Constant => 1,
            Degree::Linear => 2,
        }
    }

    /// Minimum number of positively weighted observations.
    pub fn min_points(self) -> usize {
        2 * self.n_coef()
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degree::Constant => "constant",
            Degree::Linear => "linear",
        })
    }
}

impl FromStr for Degree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" | "0" => Ok(Degree::Constant),
            "linear" | "1" => Ok(Degree::Linear),
            other => Err(Error::InvalidInput(format!("unknown degree '{other}'"))),
        }
    }
}

/// Local design around a center `t0`: offsets `t_j - t0` define the rows of
/// X (`(1)` or `(1, t_j - t0)`), and `weights` the diagonal of W.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDesign {
    pub center: f64,
    pub degree: Degree,
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
    pub kernel: KernelSpec,
    pub n_positive: usize,
}

impl LocalDesign {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn n_coef(&self) -> usize {
        self.degree.n_coef()
    }

    /// Row j of X.
    #[inline]
    pub fn row(&self, j: usize) -> [f64; 2] {
        [1.0, self.offsets[j]]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Dense m x p design matrix.
    pub fn x_matrix(&self) -> DMatrix<f64> {
        let p = self.n_coef();
        DMatrix::from_fn(self.len(), p, |j, c| self.row(j)[c])
    }
}

/// Build the local design at `t0`.
pub fn build_design(t0: f64, times: &[f64], spec: &KernelSpec, degree: Degree) -> Result<LocalDesign> {
    if times.is_empty() {
        return Err(Error::InvalidInput("no observation times".into()));
    }
    if !t0.is_finite() {
        return Err(Error::InvalidInput(format!("center must be finite, got {t0}")));
    }
    let offsets: Vec<f64> = times.iter().map(|&t| t - t0).collect();
    let weights: Vec<f64> = offsets.iter().map(|&u| spec.weight(u)).collect();
    let n_positive = weights.iter().filter(|&&w| w > 0.0).count();
    let total: f64 = weights.iter().sum();
    let required = degree.min_points();
    if n_positive < required || total < MIN_TOTAL_WEIGHT {
        return Err(Error::InsufficientLocalData {
            center: t0,
            positive: n_positive,
            required,
        });
    }
    Ok(LocalDesign {
        center: t0,
        degree,
        offsets,
        weights,
        kernel: *spec,
        n_positive,
    })
}
