//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain numbers and returns a JSON string: either
//! the view the page draws, or `{"error": "..."}`. The same functions are
//! ordinary Rust on native targets, which is how they are tested.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use surprise::design::{draw, draw_uniform, find_c, kernels, Objective, SamplingPlan, Subsample};
use surprise::rng::{purpose, stream};
use surprise::simulation::scenario::{Generator, Response};
use surprise::simulation::summary::{mean, sample_variance};
use surprise::{fit_ht, pilot_uniform_mle, Dataset, Family, FitOptions, LossModel, PilotEstimate};

const MAX_N: usize = 200_000;
const MAX_REPS: usize = 500;

#[derive(Debug, Serialize)]
pub struct RateView {
    /// `None` when every row with a positive kernel fits in the budget.
    pub c: Option<f64>,
    pub capped: usize,
    pub probs: Vec<f64>,
    pub budget: f64,
    pub expected_size: f64,
}

#[derive(Debug, Serialize)]
pub struct DesignView {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub probs: Vec<f64>,
    pub drawn: Vec<usize>,
    pub c: f64,
    pub pilot: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloView {
    /// Slope estimates for `x₁`, one per successful replication.
    pub ht: Vec<f64>,
    pub uniform: Vec<f64>,
    pub truth: f64,
    pub ht_variance: f64,
    pub uniform_variance: f64,
    pub variance_ratio: f64,
    /// Share of HT Wald intervals containing the truth, in percent.
    pub coverage: f64,
    pub mean_subsample: f64,
    pub failures: usize,
}

/// Two-covariate logistic model with about 6% cases.
fn generator() -> Generator {
    Generator { response: Response::Bernoulli, alpha: -3.5, beta: vec![1.5, -1.0], quad: 0.0, x_sd: 1.0 }
}

fn objective(name: &str) -> Result<Objective, String> {
    Ok(match name {
        "prediction" => Objective::Prediction,
        "mse" => Objective::Mse,
        "lcc" => Objective::Lcc,
        "direction" => Objective::Direction(vec![0.0, 1.0, 0.0]),
        other => return Err(format!("unknown objective {other:?}")),
    })
}

fn check(rate: f64, n: usize) -> Result<(), String> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(format!("rate {rate} must lie in (0, 1)"));
    }
    if !(200..=MAX_N).contains(&n) {
        return Err(format!("n = {n} must lie in [200, {MAX_N}]"));
    }
    Ok(())
}

fn pilot(data: &Dataset, model: LossModel, seed: u64, path: &[u64]) -> Result<PilotEstimate, String> {
    let size = 500.min(data.n());
    pilot_uniform_mle(data, model, size, &mut stream(seed, path), &FitOptions::default().newton).map_err(|e| e.to_string())
}

/// The rate constant and capped probabilities for hand-entered kernels.
pub fn rate_view(kernels: &[f64], rate: f64) -> Result<RateView, String> {
    let rc = find_c(kernels, rate).map_err(|e| e.to_string())?;
    let plan = SamplingPlan::at_rate(kernels.to_vec(), rate).map_err(|e| e.to_string())?;
    Ok(RateView {
        c: (!rc.saturated()).then_some(rc.c),
        capped: rc.capped,
        expected_size: plan.expected_size(),
        probs: plan.probs,
        budget: kernels.len() as f64 * rate,
    })
}

/// One simulated dataset, its inclusion probabilities, and one draw.
pub fn design_view(objective_name: &str, rate: f64, n: usize, seed: u64) -> Result<DesignView, String> {
    check(rate, n)?;
    let obj = objective(objective_name)?;
    let data = generator().generate_at(n, seed, &[purpose::DATA]);
    let model = LossModel::for_covariates(Family::Logistic, 2);
    let pilot = pilot(&data, model, seed, &[purpose::PILOT])?;
    let k = kernels(&data, model, &pilot, &obj).map_err(|e| e.to_string())?;
    let plan = SamplingPlan::at_rate(k, rate).map_err(|e| e.to_string())?;
    let sub = draw(&plan, &mut stream(seed, &[purpose::DRAW]));
    Ok(DesignView {
        x1: (0..n).map(|i| data.x(i)[0]).collect(),
        x2: (0..n).map(|i| data.x(i)[1]).collect(),
        y: data.responses().expect("generated").to_vec(),
        probs: plan.probs,
        drawn: sub.indices,
        c: plan.c,
        pilot: pilot.theta_tilde,
    })
}

/// HT under the chosen design against an unweighted uniform subsample of the
/// same expected size, over `reps` fresh datasets.
pub fn monte_carlo_view(objective_name: &str, rate: f64, n: usize, reps: usize, seed: u64) -> Result<MonteCarloView, String> {
    check(rate, n)?;
    if !(2..=MAX_REPS).contains(&reps) {
        return Err(format!("reps = {reps} must lie in [2, {MAX_REPS}]"));
    }
    let obj = objective(objective_name)?;
    let g = generator();
    let truth = g.beta[0];
    let model = LossModel::for_covariates(Family::Logistic, 2);
    let opts = FitOptions::default();
    let (mut ht, mut uniform, mut covered, mut sizes, mut failures) = (Vec::new(), Vec::new(), 0, Vec::new(), 0);
    for rep in 0..reps as u64 {
        let once = || -> Result<(f64, bool, usize, f64), String> {
            let data = g.generate_at(n, seed, &[purpose::DATA, rep]);
            let pilot = pilot(&data, model, seed, &[purpose::PILOT, rep])?;
            let k = kernels(&data, model, &pilot, &obj).map_err(|e| e.to_string())?;
            let plan = SamplingPlan::at_rate(k, rate).map_err(|e| e.to_string())?;
            let sub = draw(&plan, &mut stream(seed, &[purpose::DRAW, rep]));
            let fit = fit_ht(&data, model, &sub, Some(&pilot.theta_tilde), &opts).map_err(|e| e.to_string())?;
            let (lo, hi) = fit.interval(1, opts.level).map_err(|e| e.to_string())?;
            let m = (rate * n as f64).round() as usize;
            let rows = draw_uniform(n, m, &mut stream(seed, &[purpose::UNIFORM, rep]));
            let plain = fit_ht(&data, model, &Subsample::uniform(rows, 1.0), Some(&pilot.theta_tilde), &opts)
                .map_err(|e| e.to_string())?;
            let hit = lo <= truth && truth <= hi;
            Ok((fit.theta_hat[1], hit, sub.len(), plain.theta_hat[1]))
        };
        match once() {
            Ok((b, hit, size, u)) => {
                ht.push(b);
                covered += usize::from(hit);
                sizes.push(size as f64);
                uniform.push(u);
            }
            Err(_) => failures += 1,
        }
    }
    if ht.len() < 2 {
        return Err(format!("only {} of {reps} replications succeeded", ht.len()));
    }
    let (hv, uv) = (sample_variance(&ht), sample_variance(&uniform));
    Ok(MonteCarloView {
        truth,
        ht_variance: hv,
        uniform_variance: uv,
        variance_ratio: hv / uv,
        coverage: 100.0 * covered as f64 / ht.len() as f64,
        mean_subsample: mean(&sizes),
        failures,
        ht,
        uniform,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable view"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn rate_constant(kernels: Vec<f64>, rate: f64) -> String {
    to_json(rate_view(&kernels, rate))
}

#[wasm_bindgen]
pub fn design(objective: &str, rate: f64, n: u32, seed: u32) -> String {
    to_json(design_view(objective, rate, n as usize, seed.into()))
}

#[wasm_bindgen]
pub fn monte_carlo(objective: &str, rate: f64, n: u32, reps: u32, seed: u32) -> String {
    to_json(monte_carlo_view(objective, rate, n as usize, reps as usize, seed.into()))
}
