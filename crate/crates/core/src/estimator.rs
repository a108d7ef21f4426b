//! Horvitz–Thompson weighted M-estimation with sandwich covariance.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::{format_float, Dataset};
use crate::design::Subsample;
use crate::linalg::{inverse_spd, SymmetricMatrix};
use crate::loss::{Family, LossError, LossModel};
use crate::newton::{newton_minimize, NewtonOptions, SolverError, SolverReport};
use crate::pilot::initial_theta;
use crate::risk::{weighted_hessian, weighted_score_outer, Rows, WeightedRisk};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("subsample has {size} rows but the model has {dim} parameters")]
    TooSmall { size: usize, dim: usize },
    #[error("weight {value} at subsample position {index} is not a positive finite number")]
    InvalidWeight { index: usize, value: f64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("weighted fit failed: {0}")]
    Solver(#[from] SolverError),
    #[error("weighted fit did not converge after {} iterations (gradient norm {:e})", .0.iterations, .0.final_gradient_norm)]
    NotConverged(SolverReport),
    #[error("confidence level {0} must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("no covariance available for inference")]
    NoCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub newton: NewtonOptions,
    pub level: f64,
    /// Skip the sandwich when only the point estimate is wanted.
    pub inference: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), level: 0.95, inference: true }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    /// `Â⁻¹ V̂ Â⁻¹ / n`.
    pub covariance: Option<SymmetricMatrix>,
    pub std_errors: Option<Vec<f64>>,
    pub level: f64,
    pub wald_ci: Option<Vec<(f64, f64)>>,
    pub subsample_size: usize,
    pub n: usize,
    pub solver: SolverReport,
    /// Why inference is missing when the point estimate exists.
    pub inference_warning: Option<String>,
}

/// Two-sided normal quantile `Φ⁻¹((1 + level) / 2)`.
pub fn normal_quantile(level: f64) -> Result<f64, FitError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(FitError::InvalidLevel(level));
    }
    Ok(Normal::standard().inverse_cdf(0.5 * (1.0 + level)))
}

/// `θⱼ ± z·se`.
pub fn wald_interval(estimate: f64, se: f64, level: f64) -> Result<(f64, f64), FitError> {
    let z = normal_quantile(level)?;
    Ok((estimate - z * se, estimate + z * se))
}

impl FitResult {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn interval(&self, j: usize, level: f64) -> Result<(f64, f64), FitError> {
        let se = self.std_errors.as_ref().ok_or(FitError::NoCovariance)?;
        wald_interval(self.theta_hat[j], se[j], level)
    }

    /// `coordinate,estimate,se,ci_lo,ci_hi`; missing inference is written as `NA`.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "coordinate,estimate,se,ci_lo,ci_hi")?;
        for j in 0..self.dim() {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("theta{j}"));
            let se = self.std_errors.as_ref().map_or("NA".to_string(), |s| format_float(s[j]));
            let (lo, hi) = self
                .wald_ci
                .as_ref()
                .map_or(("NA".into(), "NA".into()), |c| (format_float(c[j].0), format_float(c[j].1)));
            writeln!(w, "{name},{},{se},{lo},{hi}", format_float(self.theta_hat[j]))?;
        }
        Ok(())
    }
}

/// Coordinate names `intercept, x₁, …` for a dataset.
pub fn coordinate_names(data: &Dataset) -> Vec<String> {
    std::iter::once("intercept".to_string()).chain(data.column_names().iter().cloned()).collect()
}

fn check_subsample(sub: &Subsample, dim: usize) -> Result<(), FitError> {
    if sub.len() < dim {
        return Err(FitError::TooSmall { size: sub.len(), dim });
    }
    if let Some((index, &value)) = sub.weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(FitError::InvalidWeight { index, value });
    }
    Ok(())
}

/// Minimize `Σ wᵢ l(dᵢ; θ)` over the subsample, then (optionally) the sandwich.
///
/// `start` defaults to the intercept-only guess; passing the pilot is usually faster.
pub fn fit_ht(
    data: &Dataset,
    model: LossModel,
    sub: &Subsample,
    start: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    let dim = model.dim();
    check_subsample(sub, dim)?;
    if let Some(s) = start {
        if s.len() != dim {
            return Err(LossError::DimensionMismatch { expected: dim, found: s.len() }.into());
        }
    }
    let risk = WeightedRisk::new(data, model, Rows::Subset(&sub.indices), Some(&sub.weights))?;
    let theta0 = match start {
        Some(s) => s.to_vec(),
        None => {
            let y = data.responses().expect("checked by risk");
            let wsum: f64 = sub.weights.iter().sum();
            let ybar = sub.indices.iter().zip(&sub.weights).map(|(&i, w)| w * y[i]).sum::<f64>() / wsum;
            initial_theta(model.family(), dim, ybar)
        }
    };
    let (theta, report) = newton_minimize(&risk, &theta0, &options.newton)?;
    if !report.converged {
        return Err(FitError::NotConverged(report));
    }

    let mut result = FitResult {
        theta_hat: theta,
        covariance: None,
        std_errors: None,
        level: options.level,
        wald_ci: None,
        subsample_size: sub.len(),
        n: data.n(),
        solver: report,
        inference_warning: None,
    };
    if options.inference {
        let z = normal_quantile(options.level)?;
        match sandwich(data, model, sub, &result.theta_hat) {
            Ok(cov) => {
                let se: Vec<f64> = cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
                result.wald_ci =
                    Some(result.theta_hat.iter().zip(&se).map(|(t, s)| (t - z * s, t + z * s)).collect());
                result.std_errors = Some(se);
                result.covariance = Some(cov);
            }
            Err(msg) => result.inference_warning = Some(msg),
        }
    }
    Ok(result)
}

/// `Â⁻¹ V̂ Â⁻¹ / n`, or a description of why `Â` could not be inverted.
pub fn sandwich(data: &Dataset, model: LossModel, sub: &Subsample, theta: &[f64]) -> Result<SymmetricMatrix, String> {
    let a = weighted_hessian(data, model, theta, &sub.indices, &sub.weights).map_err(|e| e.to_string())?;
    let v = weighted_score_outer(data, model, theta, &sub.indices, &sub.weights).map_err(|e| e.to_string())?;
    let a_inv = inverse_spd(&a).map_err(|e| format!("weighted curvature is singular: {e}"))?;
    let cov = v.sandwich(&a_inv);
    let n = data.n() as f64;
    let m = cov.into_matrix() / n;
    Ok(SymmetricMatrix::from_upper(m))
}

/// Unweighted fit on the subsample with `θ̃` added back.
///
/// This is the classical local case-control correction: for a logistic model,
/// accepting rows with probability `|y − p̃|` shifts the log-odds by exactly
/// `θ̃`, so the subsample MLE recovers `θ − θ̃`.
pub fn lcc_adjusted_fit(
    data: &Dataset,
    sub: &Subsample,
    pilot_theta: &[f64],
    options: &NewtonOptions,
) -> Result<Vec<f64>, FitError> {
    let model = LossModel::for_covariates(Family::Logistic, data.q());
    if pilot_theta.len() != model.dim() {
        return Err(LossError::DimensionMismatch { expected: model.dim(), found: pilot_theta.len() }.into());
    }
    let unit = Subsample::uniform(sub.indices.clone(), 1.0);
    let opts = FitOptions { newton: *options, inference: false, ..Default::default() };
    let fit = fit_ht(data, model, &unit, None, &opts)?;
    Ok(fit.theta_hat.iter().zip(pilot_theta).map(|(a, b)| a + b).collect())
}
