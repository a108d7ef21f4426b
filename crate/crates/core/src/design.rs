//! Sampling kernels, the rate constant `c`, and Poisson draws.
//!
//! For a GLM the per-row gradient is `g = -S·z`, so every kernel factorizes as
//! `|S(y, t)|` times a row-independent functional of `z`; the matrix work is
//! done once up front.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{linear_index, Dataset};
use crate::linalg::{dot, LinalgError, SymmetricMatrix, DEFAULT_RELATIVE_FLOOR};
use crate::loss::{LossError, LossModel};
use crate::par::{map_chunks, CHUNK};
use crate::pilot::PilotEstimate;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("target rate {0} must lie in (0, 1]")]
    InvalidRate(f64),
    #[error("kernel {index} is {value}; kernels must be finite and non-negative")]
    InvalidKernel { index: usize, value: f64 },
    #[error("all kernels are zero; the design is degenerate")]
    Degenerate,
    #[error("direction vector has length {found}, expected {expected}")]
    DirectionLength { expected: usize, found: usize },
    #[error("direction vector must be finite and non-zero")]
    InvalidDirection,
    #[error("minimum probability {min_prob} is infeasible at rate {rate}")]
    InfeasibleMinProb { min_prob: f64, rate: f64 },
    #[error("pilot curvature is numerically zero")]
    SingularCurvature,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// What the subsample is meant to estimate well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Excess prediction risk: `‖Ã^{-1/2} g‖`.
    Prediction,
    /// Variance of `vᵀθ̂`: `|vᵀ Ã⁻¹ g|`.
    Direction(Vec<f64>),
    /// Trace of the covariance: `‖Ã⁻¹ g‖`.
    Mse,
    /// Local case-control: `|S|`, i.e. `|y − p̃|` for logistic regression.
    Lcc,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Prediction => "prediction",
            Objective::Direction(_) => "direction",
            Objective::Mse => "mse",
            Objective::Lcc => "lcc",
        }
    }
}

/// `v = n⁻¹ Σ σ̃ᵢ zᵢ`, the direction whose kernel coincides with the LCC kernel.
pub fn lcc_direction(data: &Dataset, model: LossModel, theta: &[f64]) -> Result<Vec<f64>, DesignError> {
    let family = model.family();
    let mut v = vec![0.0; model.dim()];
    for i in 0..data.n() {
        let x = data.x(i);
        let s = family.score_variance_at(linear_index(theta, x))?;
        v[0] += s;
        for (a, xv) in v[1..].iter_mut().zip(x) {
            *a += s * xv;
        }
    }
    let n = data.n() as f64;
    v.iter_mut().for_each(|a| *a /= n);
    Ok(v)
}

/// Unnormalized kernels `π̃ᵢ` evaluated at the pilot.
pub fn kernels(
    data: &Dataset,
    model: LossModel,
    pilot: &PilotEstimate,
    objective: &Objective,
) -> Result<Vec<f64>, DesignError> {
    let p = model.dim();
    if !data.has_response() {
        return Err(LossError::MissingResponse.into());
    }
    if data.q() + 1 != p || pilot.theta_tilde.len() != p {
        return Err(LossError::DimensionMismatch { expected: p, found: pilot.theta_tilde.len() }.into());
    }
    // Row-independent linear map applied to z; None for LCC.
    enum Map {
        Norm(SymmetricMatrix),
        Linear(Vec<f64>),
        Unit,
    }
    let curvature = || -> Result<(crate::linalg::Spectral, f64), DesignError> {
        let spec = pilot.a_tilde.spectral()?;
        let top = spec.max_eigenvalue();
        if top <= 0.0 || !top.is_finite() {
            return Err(DesignError::SingularCurvature);
        }
        Ok((spec, DEFAULT_RELATIVE_FLOOR * top))
    };
    let map = match objective {
        Objective::Prediction => {
            let (spec, floor) = curvature()?;
            Map::Norm(spec.inv_sqrt(floor))
        }
        Objective::Mse => {
            let (spec, floor) = curvature()?;
            Map::Norm(spec.inverse(floor))
        }
        Objective::Direction(v) => {
            if v.len() != p {
                return Err(DesignError::DirectionLength { expected: p, found: v.len() });
            }
            if v.iter().any(|a| !a.is_finite()) || v.iter().all(|&a| a == 0.0) {
                return Err(DesignError::InvalidDirection);
            }
            let (spec, floor) = curvature()?;
            Map::Linear(spec.inverse(floor).mul_vec(v))
        }
        Objective::Lcc => Map::Unit,
    };

    let family = model.family();
    let theta = &pilot.theta_tilde;
    let y = data.responses().expect("checked");
    let row_factor = |x: &[f64], z: &mut Vec<f64>| -> f64 {
        match &map {
            Map::Unit => 1.0,
            Map::Linear(u) => (u[0] + dot(&u[1..], x)).abs(),
            Map::Norm(m) => {
                z.clear();
                z.push(1.0);
                z.extend_from_slice(x);
                let m = m.as_matrix();
                let mut ss = 0.0;
                for a in 0..p {
                    let mut acc = 0.0;
                    for b in 0..p {
                        acc += m[(a, b)] * z[b];
                    }
                    ss += acc * acc;
                }
                ss.sqrt()
            }
        }
    };
    let chunks = map_chunks(data.n(), CHUNK, |range| {
        let mut z = Vec::with_capacity(p);
        range
            .map(|i| {
                let x = data.x(i);
                family.score_at(y[i], linear_index(theta, x)).abs() * row_factor(x, &mut z)
            })
            .collect::<Vec<_>>()
    });
    Ok(chunks.concat())
}

/// Outcome of the rate-constant search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstant {
    /// Largest `c` with `Σ min(c·π̃ᵢ, 1) ≤ n·r`; `+∞` when even sampling every
    /// row with a positive kernel stays within budget.
    pub c: f64,
    /// Number of rows with `c·π̃ᵢ ≥ 1`.
    pub capped: usize,
}

impl RateConstant {
    pub fn saturated(&self) -> bool {
        self.c.is_infinite()
    }
}

fn validate(kernels: &[f64], r: f64) -> Result<(), DesignError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(DesignError::InvalidRate(r));
    }
    if let Some((index, &value)) = kernels.iter().enumerate().find(|(_, k)| !(k.is_finite() && **k >= 0.0)) {
        return Err(DesignError::InvalidKernel { index, value });
    }
    if kernels.iter().all(|&k| k == 0.0) {
        return Err(DesignError::Degenerate);
    }
    Ok(())
}

/// Solve for the rate constant by bisection over the sorted kernel index.
pub fn find_c(kernels: &[f64], r: f64) -> Result<RateConstant, DesignError> {
    validate(kernels, r)?;
    let n = kernels.len();
    let budget = n as f64 * r;
    let positive = kernels.iter().filter(|&&k| k > 0.0).count();
    if positive as f64 <= budget {
        return Ok(RateConstant { c: f64::INFINITY, capped: positive });
    }

    let total: f64 = kernels.iter().sum();
    let c0 = budget / total;
    let max = kernels.iter().cloned().fold(0.0, f64::max);
    if c0 * max <= 1.0 {
        let capped = kernels.iter().filter(|&&k| c0 * k >= 1.0).count();
        return Ok(RateConstant { c: c0, capped });
    }

    let mut sorted = kernels.to_vec();
    sorted.sort_by(f64::total_cmp);
    // prefix[k] = sum of the k smallest kernels
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &k in &sorted {
        acc += k;
        prefix.push(acc);
    }
    // Sampled mass at c = 1/s₍ₖ₎ (1-based k): rows below k are uncapped, the rest capped.
    let mass = |k: usize| prefix[k - 1] / sorted[k - 1] + (n - k + 1) as f64;

    let zeros = n - positive;
    // mass(zeros + 1) = positive > budget, mass(n) = total / max < budget.
    let (mut lo, mut hi) = (zeros + 1, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if mass(mid) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = lo;
    let c = (budget - (n - m) as f64) / prefix[m];
    Ok(RateConstant { c, capped: n - m })
}

/// Inclusion probabilities and the design that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub kernels: Vec<f64>,
    pub c: f64,
    pub probs: Vec<f64>,
    /// `None` for plans built from a fixed constant.
    pub target_rate: Option<f64>,
    pub min_prob: Option<f64>,
    pub warnings: Vec<String>,
}

fn capped(c: f64, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        (c * k).min(1.0)
    }
}

impl SamplingPlan {
    /// Plan at target rate `r`, as large as the budget allows.
    pub fn at_rate(kernels: Vec<f64>, r: f64) -> Result<Self, DesignError> {
        let rc = find_c(&kernels, r)?;
        let mut warnings = Vec::new();
        if rc.saturated() {
            warnings.push(format!(
                "budget {r} covers every row with a positive kernel; sampling all {} of them",
                rc.capped
            ));
        } else if rc.capped > 0 {
            warnings.push(format!("{} rows have inclusion probability capped at 1", rc.capped));
        }
        let probs = kernels.iter().map(|&k| capped(rc.c, k)).collect();
        Ok(Self { kernels, c: rc.c, probs, target_rate: Some(r), min_prob: None, warnings })
    }

    /// Plan with a fixed constant, e.g. `c = 1` for classical local case-control.
    pub fn with_constant(kernels: Vec<f64>, c: f64) -> Result<Self, DesignError> {
        validate(&kernels, 1.0)?;
        let probs = kernels.iter().map(|&k| capped(c, k)).collect();
        Ok(Self { kernels, c, probs, target_rate: None, min_prob: None, warnings: Vec::new() })
    }

    /// Plan at rate `r` whose probabilities are floored at `min_prob`.
    ///
    /// `c` is re-solved so that `Σ clamp(c·π̃ᵢ, min_prob, 1) ≤ n·r` still holds.
    pub fn at_rate_with_floor(kernels: Vec<f64>, r: f64, min_prob: f64) -> Result<Self, DesignError> {
        validate(&kernels, r)?;
        if !(min_prob > 0.0 && min_prob <= r) {
            return Err(DesignError::InfeasibleMinProb { min_prob, rate: r });
        }
        let n = kernels.len() as f64;
        let budget = n * r;
        let mass = |c: f64| kernels.iter().map(|&k| (c * k).clamp(min_prob, 1.0)).sum::<f64>();
        let mut warnings = Vec::new();
        let max = kernels.iter().cloned().fold(0.0, f64::max);
        let c = if mass(f64::MAX / max.max(1.0)) <= budget {
            warnings.push("budget covers every row; sampling all of them".into());
            f64::INFINITY
        } else {
            // mass(0) = n·min_prob ≤ budget; geometric bracket then bisect.
            let (mut lo, mut hi) = (0.0, 1.0 / max);
            while mass(hi) <= budget {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if mass(mid) <= budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let probs = kernels
            .iter()
            .map(|&k| if c.is_infinite() { 1.0 } else { (c * k).clamp(min_prob, 1.0) })
            .collect();
        Ok(Self { kernels, c, probs, target_rate: Some(r), min_prob: Some(min_prob), warnings })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// Expected subsample size `Σ πᵢ`.
    pub fn expected_size(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Indices of the drawn rows, ascending, with HT weights `1/πᵢ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subsample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Subsample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every row with unit weight.
    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect(), weights: vec![1.0; n] }
    }

    /// Given rows with a common weight.
    pub fn uniform(indices: Vec<usize>, weight: f64) -> Self {
        let weights = vec![weight; indices.len()];
        Self { indices, weights }
    }
}

/// Independent Bernoulli(πᵢ) draws.
///
/// One master value is drawn from `rng`; each chunk of rows then uses its own
/// substream, so the outcome does not depend on the number of workers.
pub fn draw<R: Rng + ?Sized>(plan: &SamplingPlan, rng: &mut R) -> Subsample {
    let master: u64 = rng.random();
    let probs = &plan.probs;
    let chunks = map_chunks(probs.len(), CHUNK, |range| {
        let mut local = stream(master, &[range.start as u64]);
        let mut hits = Vec::new();
        for i in range {
            let u: f64 = local.random();
            if u < probs[i] {
                hits.push(i);
            }
        }
        hits
    });
    let indices: Vec<usize> = chunks.concat();
    let weights = indices.iter().map(|&i| 1.0 / probs[i]).collect();
    Subsample { indices, weights }
}

/// Uniform sample of `m` distinct rows (sorted).
pub fn draw_uniform<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, m.min(n)).into_vec();
    idx.sort_unstable();
    idx
}
