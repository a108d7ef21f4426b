//! Pilot estimates `θ̃` and the full-data curvature `Ã = n⁻¹ Σ G(dᵢ; θ̃)`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::SymmetricMatrix;
use crate::loss::{Family, LossError, LossModel};
use crate::newton::{newton_minimize, NewtonOptions, SolverError, SolverReport};
use crate::risk::{mean_hessian, Rows, WeightedRisk};

#[derive(Debug, Error)]
pub enum PilotError {
    #[error("pilot precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("pilot fit failed: {0}")]
    Solver(#[from] SolverError),
    #[error("pilot fit did not converge after {} iterations", .0.iterations)]
    NotConverged(SolverReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotMethod {
    UniformMle,
    WeightedCaseControl,
    External,
}

impl PilotMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PilotMethod::UniformMle => "uniform-mle",
            PilotMethod::WeightedCaseControl => "wcc",
            PilotMethod::External => "external",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PilotEstimate {
    pub theta_tilde: Vec<f64>,
    pub a_tilde: SymmetricMatrix,
    pub method: PilotMethod,
    pub pilot_size: usize,
    /// Rows used to fit the pilot, sorted; empty for external pilots.
    pub pilot_rows: Vec<usize>,
    pub solver: Option<SolverReport>,
    pub warnings: Vec<String>,
}

/// Intercept-only starting point at the link of the (weighted) mean response.
pub fn initial_theta(family: Family, dim: usize, mean_y: f64) -> Vec<f64> {
    let mut theta = vec![0.0; dim];
    let eps = 1e-6;
    theta[0] = match family {
        Family::Logistic => {
            let p = mean_y.clamp(eps, 1.0 - eps);
            (p / (1.0 - p)).ln()
        }
        Family::Probit => {
            use statrs::distribution::{ContinuousCDF, Normal};
            Normal::standard().inverse_cdf(mean_y.clamp(eps, 1.0 - eps))
        }
        Family::PoissonLog => mean_y.max(eps).ln(),
        Family::GaussianLinear => mean_y,
    };
    theta
}

fn weighted_mean_response(data: &Dataset, rows: &[usize], weights: Option<&[f64]>) -> f64 {
    let y = data.responses().expect("response checked");
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &i) in rows.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[k]);
        num += w * y[i];
        den += w;
    }
    num / den
}

/// Fit `model` on the given rows (optionally weighted), starting from the intercept-only guess.
pub fn fit_rows(
    data: &Dataset,
    model: LossModel,
    rows: &[usize],
    weights: Option<&[f64]>,
    options: &NewtonOptions,
) -> Result<(Vec<f64>, SolverReport), PilotError> {
    let risk = WeightedRisk::new(data, model, Rows::Subset(rows), weights)?;
    let start = initial_theta(model.family(), model.dim(), weighted_mean_response(data, rows, weights));
    let (theta, report) = newton_minimize(&risk, &start, options)?;
    if !report.converged {
        return Err(PilotError::NotConverged(report));
    }
    Ok((theta, report))
}

fn sample_sorted<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn check_data(data: &Dataset, model: LossModel) -> Result<(), PilotError> {
    if !data.has_response() {
        return Err(PilotError::Loss(LossError::MissingResponse));
    }
    if data.q() + 1 != model.dim() {
        return Err(PilotError::Loss(LossError::DimensionMismatch { expected: model.dim(), found: data.q() + 1 }));
    }
    Ok(())
}

/// MLE of `fit_model` on a uniform subsample, with `Ã` under `target`.
///
/// Passing a `fit_model` different from `target` yields a deliberately
/// inconsistent pilot (e.g. probit coefficients fed to a logistic target).
pub fn pilot_uniform_fit<R: Rng + ?Sized>(
    data: &Dataset,
    target: LossModel,
    fit_model: LossModel,
    pilot_size: usize,
    rng: &mut R,
    options: &NewtonOptions,
) -> Result<PilotEstimate, PilotError> {
    check_data(data, target)?;
    if pilot_size == 0 || pilot_size > data.n() {
        return Err(PilotError::Precondition(format!("pilot size {pilot_size} must be in 1..={}", data.n())));
    }
    let rows = sample_sorted(rng, data.n(), pilot_size);
    let (theta, report) = fit_rows(data, fit_model, &rows, None, options)?;
    let a_tilde = mean_hessian(data, target, &theta)?;
    Ok(PilotEstimate {
        theta_tilde: theta,
        a_tilde,
        method: PilotMethod::UniformMle,
        pilot_size,
        pilot_rows: rows,
        solver: Some(report),
        warnings: Vec::new(),
    })
}

pub fn pilot_uniform_mle<R: Rng + ?Sized>(
    data: &Dataset,
    model: LossModel,
    pilot_size: usize,
    rng: &mut R,
    options: &NewtonOptions,
) -> Result<PilotEstimate, PilotError> {
    pilot_uniform_fit(data, model, model, pilot_size, rng, options)
}

/// Weighted case-control logistic pilot on a 50-50 split of cases and controls.
pub fn pilot_wcc<R: Rng + ?Sized>(
    data: &Dataset,
    pilot_size: usize,
    rng: &mut R,
    options: &NewtonOptions,
) -> Result<PilotEstimate, PilotError> {
    let model = LossModel::for_covariates(Family::Logistic, data.q());
    check_data(data, model)?;
    if pilot_size == 0 || pilot_size % 2 != 0 {
        return Err(PilotError::Precondition(format!("pilot size {pilot_size} must be positive and even")));
    }
    let y = data.responses().expect("checked");
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 {
            cases.push(i);
        } else if v == 0.0 {
            controls.push(i);
        } else {
            return Err(PilotError::Precondition(format!("row {i}: response {v} is not binary")));
        }
    }
    if cases.is_empty() || controls.is_empty() {
        return Err(PilotError::Precondition("both classes must be present".into()));
    }
    let half = pilot_size / 2;
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(pilot_size);
    let mut weights = Vec::with_capacity(pilot_size);
    for (label, class) in [("case", &cases), ("control", &controls)] {
        let take = half.min(class.len());
        if take < half {
            warnings.push(format!("only {} {label}s available; sampling all of them", class.len()));
        }
        let w = class.len() as f64 / take as f64;
        for k in sample_sorted(rng, class.len(), take) {
            rows.push(class[k]);
            weights.push(w);
        }
    }
    // Keep row order ascending so sums are taken in data order.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&k| rows[k]);
    let rows: Vec<usize> = order.iter().map(|&k| rows[k]).collect();
    let weights: Vec<f64> = order.iter().map(|&k| weights[k]).collect();

    let (theta, report) = fit_rows(data, model, &rows, Some(&weights), options)?;
    let a_tilde = mean_hessian(data, model, &theta)?;
    Ok(PilotEstimate {
        theta_tilde: theta,
        a_tilde,
        method: PilotMethod::WeightedCaseControl,
        pilot_size: rows.len(),
        pilot_rows: rows,
        solver: Some(report),
        warnings,
    })
}

/// Wrap a supplied `θ̃`; `Ã` is evaluated under the target model.
pub fn pilot_external(theta: &[f64], data: &Dataset, model: LossModel) -> Result<PilotEstimate, PilotError> {
    check_data(data, model)?;
    if theta.len() != model.dim() {
        return Err(PilotError::Loss(LossError::DimensionMismatch { expected: model.dim(), found: theta.len() }));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(PilotError::Precondition("pilot parameter has non-finite entries".into()));
    }
    let a_tilde = mean_hessian(data, model, theta)?;
    Ok(PilotEstimate {
        theta_tilde: theta.to_vec(),
        a_tilde,
        method: PilotMethod::External,
        pilot_size: 0,
        pilot_rows: Vec::new(),
        solver: None,
        warnings: Vec::new(),
    })
}
