//! The replication engine.

use std::time::Instant;

use thiserror::Error;

use crate::data::Dataset;
use crate::design::{draw, draw_uniform, kernels, Objective, SamplingPlan, Subsample};
use crate::estimator::{fit_ht, lcc_adjusted_fit, FitOptions};
use crate::loss::{Family, LossModel};
use crate::par::{map_indexed, with_workers};
use crate::pilot::{pilot_uniform_fit, pilot_uniform_mle, pilot_wcc, PilotEstimate};
use crate::rng::{purpose, stream};
use crate::simulation::scenario::{Arm, Design, EstimatorKind, PilotKind, RateSpec, Scenario, ScenarioError};
use crate::simulation::summary::{summarize, MonteCarloSummary};

/// Share of failed replications above which a run is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub theta: Vec<f64>,
    pub se: Option<Vec<f64>>,
    /// Rows the estimator was fitted on.
    pub subsample: usize,
}

pub type Outcome = Result<Record, String>;

/// Everything computed for one (setting, replication).
#[derive(Debug, Clone)]
pub struct RepResult {
    pub setting: usize,
    pub rep: usize,
    /// `outcomes[arm][estimator]`.
    pub outcomes: Vec<Vec<Outcome>>,
    pub seconds: f64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{label}: {failures} of {total} replications failed (first: {first})")]
    TooManyFailures { label: String, failures: usize, total: usize, first: String, summary: Box<MonteCarloSummary> },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the machine default.
    pub workers: usize,
    pub fit: FitOptions,
}

fn pilot_for(sc: &Scenario, arm: &Arm, data: &Dataset, model: LossModel, path: &[u64]) -> Result<PilotEstimate, String> {
    let mut rng = stream(sc.seed, path);
    let newton = FitOptions::default().newton;
    let size = arm.pilot.size;
    match arm.pilot.kind {
        PilotKind::UniformMle => pilot_uniform_mle(data, model, size, &mut rng, &newton),
        PilotKind::Wcc => pilot_wcc(data, size, &mut rng, &newton),
        PilotKind::UniformProbit => {
            let probit = LossModel::new(Family::Probit, model.dim());
            pilot_uniform_fit(data, model, probit, size, &mut rng, &newton)
        }
    }
    .map_err(|e| format!("pilot: {e}"))
}

fn lcc_kernels(data: &Dataset, model: LossModel, pilot: &PilotEstimate) -> Result<Vec<f64>, String> {
    kernels(data, model, pilot, &Objective::Lcc).map_err(|e| e.to_string())
}

fn plan_for(data: &Dataset, model: LossModel, pilot: &PilotEstimate, design: &Design) -> Result<SamplingPlan, String> {
    let n = data.n() as f64;
    match design {
        Design::LccConstant => {
            SamplingPlan::with_constant(lcc_kernels(data, model, pilot)?, 1.0).map_err(|e| e.to_string())
        }
        Design::Surprise { objective, rate } => {
            let r = match rate {
                RateSpec::Rate(r) => *r,
                RateSpec::ExpectedSize(m) => *m as f64 / n,
                RateSpec::MatchLcc => {
                    lcc_kernels(data, model, pilot)?.iter().map(|k| k.min(1.0)).sum::<f64>() / n
                }
            };
            let k = kernels(data, model, pilot, objective).map_err(|e| e.to_string())?;
            SamplingPlan::at_rate(k, r).map_err(|e| e.to_string())
        }
    }
}

/// Run every arm of the scenario on one replication of one setting.
pub fn replicate(sc: &Scenario, setting: usize, rep: usize, options: &RunOptions) -> RepResult {
    let start = Instant::now();
    let generator = &sc.settings[setting].generator;
    let data = generator.generate(sc.n, sc.seed, setting, rep);
    let model = LossModel::for_covariates(sc.family, sc.q());
    let (s, r) = (setting as u64, rep as u64);
    let fit_opts = FitOptions { level: sc.level, ..options.fit };

    let mut full: Option<Outcome> = None;
    let outcomes = sc
        .arms
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            let pilot = match pilot_for(sc, arm, &data, model, &[purpose::PILOT, s, r, a as u64]) {
                Ok(p) => p,
                Err(e) => return vec![Err(e); arm.estimators.len()],
            };
            let mut draws: Vec<(Design, Result<Subsample, String>)> = Vec::new();
            let mut subsample_for = |design: &Design| -> Result<Subsample, String> {
                if let Some((_, sub)) = draws.iter().find(|(d, _)| d == design) {
                    return sub.clone();
                }
                let idx = draws.len() as u64;
                let sub = plan_for(&data, model, &pilot, design)
                    .map(|plan| draw(&plan, &mut stream(sc.seed, &[purpose::DRAW, s, r, a as u64, idx])));
                draws.push((design.clone(), sub.clone()));
                sub
            };
            arm.estimators
                .iter()
                .enumerate()
                .map(|(e, spec)| -> Outcome {
                    match &spec.kind {
                        EstimatorKind::Pilot => {
                            Ok(Record { theta: pilot.theta_tilde.clone(), se: None, subsample: pilot.pilot_size })
                        }
                        EstimatorKind::FullMle => full
                            .get_or_insert_with(|| {
                                fit_ht(&data, model, &Subsample::full(data.n()), Some(&pilot.theta_tilde), &fit_opts)
                                    .map(|f| Record { theta: f.theta_hat, se: f.std_errors, subsample: data.n() })
                                    .map_err(|e| format!("full MLE: {e}"))
                            })
                            .clone(),
                        EstimatorKind::UniformMle { size } => {
                            let mut rng = stream(sc.seed, &[purpose::UNIFORM, s, r, a as u64, e as u64]);
                            let sub = Subsample::uniform(draw_uniform(data.n(), *size, &mut rng), 1.0);
                            let fit = fit_ht(&data, model, &sub, Some(&pilot.theta_tilde), &fit_opts)
                                .map_err(|e| format!("{}: {e}", spec.label))?;
                            // With unit weights the 1/n scaling cancels in the sandwich.
                            Ok(Record { theta: fit.theta_hat, se: fit.std_errors, subsample: sub.len() })
                        }
                        EstimatorKind::Ht { design } => {
                            let sub = subsample_for(design)?;
                            let fit = fit_ht(&data, model, &sub, Some(&pilot.theta_tilde), &fit_opts)
                                .map_err(|e| format!("{}: {e}", spec.label))?;
                            Ok(Record { theta: fit.theta_hat, se: fit.std_errors, subsample: sub.len() })
                        }
                        EstimatorKind::LccAdjusted { design } => {
                            let sub = subsample_for(design)?;
                            let theta = lcc_adjusted_fit(&data, &sub, &pilot.theta_tilde, &fit_opts.newton)
                                .map_err(|e| format!("{}: {e}", spec.label))?;
                            Ok(Record { theta, se: None, subsample: sub.len() })
                        }
                    }
                })
                .collect()
        })
        .collect();
    RepResult { setting, rep, outcomes, seconds: start.elapsed().as_secs_f64() }
}

/// Run all replications of all settings and aggregate.
pub fn run(sc: &Scenario, options: &RunOptions) -> Result<MonteCarloSummary, RunError> {
    sc.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..sc.settings.len()).flat_map(|s| (0..sc.replications).map(move |r| (s, r))).collect();
    let results = with_workers(options.workers, || {
        map_indexed(jobs.len(), |k| replicate(sc, jobs[k].0, jobs[k].1, options))
    });
    let summary = summarize(sc, results);
    if let Some(row) = summary.rows.iter().find(|row| {
        let total = row.successes + row.failures;
        row.failures as f64 > MAX_FAILURE_RATE * total as f64
    }) {
        return Err(RunError::TooManyFailures {
            label: format!("{} / {} / {}", row.setting, row.arm, row.estimator),
            failures: row.failures,
            total: row.successes + row.failures,
            first: row.first_failure.clone().unwrap_or_default(),
            summary: Box::new(summary),
        });
    }
    Ok(summary)
}
