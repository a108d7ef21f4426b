//! Loss families with analytic gradient and Hessian.
//!
//! Every family is a GLM with linear index `t = θᵀz`, so the per-point loss is
//! a scalar function `l(y, t)`, the gradient is `-S(y, t)·z` and the Hessian is
//! `w(y, t)·zzᵀ` with a nonnegative curvature weight `w`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{augment, linear_index, PointRef};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("loss requires a response but the data point has none")]
    MissingResponse,
    #[error("parameter has length {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{operation} is not implemented for the {family} family")]
    NotImplemented { family: Family, operation: &'static str },
    #[error("unknown loss family {0:?}")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Logistic,
    PoissonLog,
    GaussianLinear,
    /// Bernoulli likelihood with the normal CDF link.
    Probit,
}

impl Family {
    pub fn is_binary(self) -> bool {
        matches!(self, Family::Logistic | Family::Probit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::PoissonLog => "poisson",
            Family::GaussianLinear => "gaussian",
            Family::Probit => "probit",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "logit" => Ok(Family::Logistic),
            "poisson" | "poisson-log" | "loglinear" | "log-linear" => Ok(Family::PoissonLog),
            "gaussian" | "gaussian-linear" | "linear" | "squared" => Ok(Family::GaussianLinear),
            "probit" => Ok(Family::Probit),
            _ => Err(LossError::UnknownFamily(s.to_owned())),
        }
    }
}

/// A loss family over a `dim = q + 1` dimensional parameter (intercept first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossModel {
    family: Family,
    dim: usize,
}

impl LossModel {
    pub fn new(family: Family, dim: usize) -> Self {
        assert!(dim >= 1, "parameter dimension must be at least 1");
        Self { family, dim }
    }

    /// Model for `q` covariates plus intercept.
    pub fn for_covariates(family: Family, q: usize) -> Self {
        Self::new(family, q + 1)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, d: &PointRef<'_>, theta: &[f64]) -> Result<f64, LossError> {
        if theta.len() != self.dim || d.x.len() + 1 != self.dim {
            let found = if theta.len() != self.dim { theta.len() } else { d.x.len() + 1 };
            return Err(LossError::DimensionMismatch { expected: self.dim, found });
        }
        d.y.ok_or(LossError::MissingResponse)
    }

    pub fn loss(&self, d: PointRef<'_>, theta: &[f64]) -> Result<f64, LossError> {
        let y = self.check(&d, theta)?;
        Ok(self.family.loss_at(y, linear_index(theta, d.x)))
    }

    pub fn grad(&self, d: PointRef<'_>, theta: &[f64]) -> Result<Vec<f64>, LossError> {
        let y = self.check(&d, theta)?;
        let s = self.family.score_at(y, linear_index(theta, d.x));
        Ok(augment(d.x).into_vec().into_iter().map(|z| -s * z).collect())
    }

    pub fn hessian(&self, d: PointRef<'_>, theta: &[f64]) -> Result<DMatrix<f64>, LossError> {
        let y = self.check(&d, theta)?;
        let w = self.family.curvature_at(y, linear_index(theta, d.x));
        let z = augment(d.x);
        let z = z.as_slice();
        Ok(DMatrix::from_fn(self.dim, self.dim, |a, b| w * z[a.min(b)] * z[a.max(b)]))
    }

    pub fn score_residual(&self, d: PointRef<'_>, theta: &[f64]) -> Result<f64, LossError> {
        let y = self.check(&d, theta)?;
        Ok(self.family.score_at(y, linear_index(theta, d.x)))
    }

    /// `Var[S(Y, t) | z]` under the model at `t = θᵀz`.
    pub fn conditional_score_variance(&self, d: PointRef<'_>, theta: &[f64]) -> Result<f64, LossError> {
        if theta.len() != self.dim || d.x.len() + 1 != self.dim {
            return Err(LossError::DimensionMismatch { expected: self.dim, found: theta.len() });
        }
        self.family.score_variance_at(linear_index(theta, d.x))
    }

    /// Mean prediction, the inverse link at `θᵀz`.
    pub fn predict(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.family.mean_at(linear_index(theta, x))
    }
}

impl Family {
    /// `l(y, t)`.
    #[inline]
    pub fn loss_at(self, y: f64, t: f64) -> f64 {
        match self {
            Family::Logistic => log1p_exp(t) - y * t,
            Family::PoissonLog => t.exp() - y * t,
            Family::GaussianLinear => (y - t) * (y - t),
            Family::Probit => -(y * log_norm_cdf(t) + (1.0 - y) * log_norm_cdf(-t)),
        }
    }

    /// `S(y, t) = -∂l/∂t`.
    #[inline]
    pub fn score_at(self, y: f64, t: f64) -> f64 {
        match self {
            Family::Logistic => y - sigmoid(t),
            Family::PoissonLog => y - t.exp(),
            Family::GaussianLinear => 2.0 * (y - t),
            Family::Probit => y * mills(t) - (1.0 - y) * mills(-t),
        }
    }

    /// `∂²l/∂t²`, the scalar in front of `zzᵀ` in the Hessian.
    #[inline]
    pub fn curvature_at(self, y: f64, t: f64) -> f64 {
        match self {
            Family::Logistic => {
                let p = sigmoid(t);
                p * (1.0 - p)
            }
            Family::PoissonLog => t.exp(),
            Family::GaussianLinear => 2.0,
            Family::Probit => {
                let up = mills(t);
                let down = mills(-t);
                (y * up * (t + up) + (1.0 - y) * down * (down - t)).max(0.0)
            }
        }
    }

    /// `E[Y | t]`.
    #[inline]
    pub fn mean_at(self, t: f64) -> f64 {
        match self {
            Family::Logistic => sigmoid(t),
            Family::PoissonLog => t.exp(),
            Family::GaussianLinear => t,
            Family::Probit => norm_cdf(t),
        }
    }

    pub fn score_variance_at(self, t: f64) -> Result<f64, LossError> {
        match self {
            Family::Logistic => {
                let p = sigmoid(t);
                Ok(p * (1.0 - p))
            }
            Family::PoissonLog => Ok(t.exp()),
            _ => Err(LossError::NotImplemented { family: self, operation: "conditional score variance" }),
        }
    }
}

/// Overflow-safe `ln(1 + eᵗ)`.
#[inline]
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn norm_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

#[inline]
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

// Below this point Φ(t)(1 - Φ(t)) drops under 1e-300 and the asymptotic
// expansions take over.
const PROBIT_TAIL: f64 = -37.0;

/// `ln Φ(t)`.
#[inline]
pub fn log_norm_cdf(t: f64) -> f64 {
    if t < PROBIT_TAIL {
        let t2 = t * t;
        -0.5 * t2 - (-t).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / t2 + 3.0 / (t2 * t2)).ln()
    } else {
        norm_cdf(t).ln()
    }
}

/// Inverse Mills ratio `φ(t)/Φ(t)`.
#[inline]
pub fn mills(t: f64) -> f64 {
    if t < PROBIT_TAIL {
        let t2 = t * t;
        -t / (1.0 - 1.0 / t2 + 3.0 / (t2 * t2))
    } else {
        norm_pdf(t) / norm_cdf(t)
    }
}
