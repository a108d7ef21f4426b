//! Scenario definitions: how data are generated and which pipelines run on them.

use serde::{Deserialize, Serialize};

use crate::design::Objective;
use crate::loss::Family;
use crate::simulation::constants::Constants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
    Sim5,
    Sim6,
    Custom,
}

impl ScenarioId {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Sim1 => "sim1",
            ScenarioId::Sim2 => "sim2",
            ScenarioId::Sim3 => "sim3",
            ScenarioId::Sim4 => "sim4",
            ScenarioId::Sim5 => "sim5",
            ScenarioId::Sim6 => "sim6",
            ScenarioId::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "sim1" => ScenarioId::Sim1,
            "sim2" => ScenarioId::Sim2,
            "sim3" => ScenarioId::Sim3,
            "sim4" => ScenarioId::Sim4,
            "sim5" => ScenarioId::Sim5,
            "sim6" => ScenarioId::Sim6,
            "custom" => ScenarioId::Custom,
            _ => return None,
        })
    }
}

/// Problem size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Reduced `n` and replication counts that run in minutes.
    #[default]
    Desk,
    /// Large `n` and replication counts.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Response {
    Bernoulli,
    Poisson,
    Gaussian { noise_sd: f64 },
}

/// `η = α + βᵀx + γ·x₁²` with `x ~ N(0, x_sd² I)`; the response depends on `η`
/// through the family's mean (identity for Gaussian).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub response: Response,
    pub alpha: f64,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub quad: f64,
    #[serde(default = "one")]
    pub x_sd: f64,
}

fn one() -> f64 {
    1.0
}

impl Generator {
    pub fn q(&self) -> usize {
        self.beta.len()
    }

    /// True when the linear working model of `family` contains the truth.
    pub fn is_specified_by(&self, family: Family) -> bool {
        let matches = matches!(
            (self.response, family),
            (Response::Bernoulli, Family::Logistic)
                | (Response::Poisson, Family::PoissonLog)
                | (Response::Gaussian { .. }, Family::GaussianLinear)
        );
        matches && self.quad == 0.0
    }

    /// `(α, β)`; the target under correct specification.
    pub fn theta0(&self) -> Vec<f64> {
        std::iter::once(self.alpha).chain(self.beta.iter().copied()).collect()
    }
}

/// How the rate of a surprise design is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RateSpec {
    Rate(f64),
    /// Expected subsample size; `r = size / n`.
    ExpectedSize(usize),
    /// Same expected size as the classical local case-control design of the arm.
    MatchLcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Design {
    /// `πᵢ = min(|Sᵢ|, 1)` with `c = 1`.
    LccConstant,
    Surprise { objective: Objective, rate: RateSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// The pilot itself.
    Pilot,
    FullMle,
    /// Unweighted MLE on a uniform subsample of the given size.
    UniformMle { size: usize },
    Ht { design: Design },
    /// Unweighted logistic fit plus `θ̃` on the design's subsample.
    LccAdjusted { design: Design },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub label: String,
    #[serde(flatten)]
    pub kind: EstimatorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotKind {
    UniformMle,
    Wcc,
    /// Probit MLE on a uniform subsample handed to a logistic target as is.
    UniformProbit,
}

impl PilotKind {
    pub fn label(self) -> &'static str {
        match self {
            PilotKind::UniformMle => "Uniform MLE",
            PilotKind::Wcc => "WCC",
            PilotKind::UniformProbit => "Probit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub kind: PilotKind,
    pub size: usize,
}

/// One pilot and the estimators computed from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub pilot: PilotSpec,
    pub estimators: Vec<EstimatorSpec>,
}

/// A generating model with its own label, e.g. correct vs misspecified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub label: String,
    pub generator: Generator,
    /// Population minimizer and its Monte-Carlo standard error when known.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    #[serde(default)]
    pub target_se: Option<Vec<f64>>,
}

/// Which coordinates the summary reports and whether it sums them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reporting {
    pub coordinates: Vec<usize>,
    pub summed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub title: String,
    pub n: usize,
    pub family: Family,
    pub settings: Vec<Setting>,
    pub arms: Vec<Arm>,
    pub replications: usize,
    pub seed: u64,
    pub reporting: Reporting,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn q(&self) -> usize {
        self.settings[0].generator.q()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.settings.is_empty() || self.arms.is_empty() {
            return bad("a scenario needs at least one setting and one arm".into());
        }
        let q = self.q();
        if self.settings.iter().any(|s| s.generator.q() != q) {
            return bad("all settings must share the covariate dimension".into());
        }
        for arm in &self.arms {
            if arm.pilot.size > self.n {
                return bad(format!("pilot size {} exceeds n = {}", arm.pilot.size, self.n));
            }
            for e in &arm.estimators {
                if let EstimatorKind::UniformMle { size } = e.kind {
                    if size > self.n || size <= q + 1 {
                        return bad(format!("uniform subsample size {size} is out of range"));
                    }
                }
            }
        }
        if self.reporting.coordinates.iter().any(|&j| j > q) {
            return bad("reported coordinate out of range".into());
        }
        Ok(())
    }

    /// A built-in scenario with calibrated constants.
    pub fn builtin(id: ScenarioId, scale: Scale) -> Option<Scenario> {
        let k = Constants::get();
        let desk = scale == Scale::Desk;
        let reps = if desk { 500 } else { 1000 };
        let seed = 20_190_000 + id as u64;
        let lcc = || Design::LccConstant;
        let est = |label: &str, kind: EstimatorKind| EstimatorSpec { label: label.into(), kind };
        let arm = |kind: PilotKind, size: usize, estimators: Vec<EstimatorSpec>| Arm {
            label: kind.label().into(),
            pilot: PilotSpec { kind, size },
            estimators,
        };
        let setting = |label: &str, generator: Generator, key: &str| {
            let (target, target_se) = match k.target(key) {
                Some(o) => (Some(o.theta.clone()), Some(o.se.clone())),
                None => (None, None),
            };
            Setting { label: label.into(), generator, target, target_se }
        };
        // Desk runs keep the pilot's share of cases, relative to the
        // subsample's, near that of the full-size runs; a uniform pilot needs
        // enough cases to fit at all.
        let (uniform_pilot, wcc_pilot) = if desk { (3_000, 300) } else { (10_000, 10_000) };
        let logistic_arms = |uniform: usize, wcc: usize, extra: bool| {
            let mut ests = vec![
                est("LCC", EstimatorKind::LccAdjusted { design: lcc() }),
                est("HT", EstimatorKind::Ht { design: lcc() }),
            ];
            if extra {
                ests.push(est("Full MLE", EstimatorKind::FullMle));
            }
            vec![arm(PilotKind::UniformMle, uniform, ests.clone()), arm(PilotKind::Wcc, wcc, ests)]
        };
        let all_beta = |q: usize| Reporting { coordinates: (1..=q).collect(), summed: true };

        let sc = match id {
            ScenarioId::Sim1 => {
                let (gen, key) = if desk { (k.sim1_desk(), "sim1_desk") } else { (k.sim1_full(), "sim1_full") };
                let q = gen.q();
                Scenario {
                    id,
                    title: "Correctly specified logistic model".into(),
                    n: if desk { 100_000 } else { 1_000_000 },
                    family: Family::Logistic,
                    settings: vec![setting("Correct", gen, key)],
                    arms: {
                        let size = if desk { 2_000 } else { 10_000 };
                        logistic_arms(size, size, true)
                    },
                    replications: reps,
                    seed,
                    reporting: all_beta(q),
                    level: 0.95,
                }
            }
            ScenarioId::Sim2 => Scenario {
                id,
                title: "Misspecified logistic model, consistent pilot".into(),
                n: if desk { 100_000 } else { 1_000_000 },
                family: Family::Logistic,
                settings: vec![setting("Incorrect", k.sim2(), "sim2")],
                arms: logistic_arms(uniform_pilot, wcc_pilot, false),
                replications: reps,
                seed,
                reporting: all_beta(5),
                level: 0.95,
            },
            ScenarioId::Sim3 => Scenario {
                id,
                title: "Misspecified logistic model, inconsistent probit pilot".into(),
                n: if desk { 100_000 } else { 1_000_000 },
                family: Family::Logistic,
                settings: vec![setting("Incorrect", k.sim2(), "sim2")],
                arms: vec![arm(
                    PilotKind::UniformProbit,
                    uniform_pilot,
                    vec![
                        est("Pilot", EstimatorKind::Pilot),
                        est("LCC", EstimatorKind::LccAdjusted { design: lcc() }),
                        est("HT", EstimatorKind::Ht { design: lcc() }),
                    ],
                )],
                replications: reps,
                seed,
                reporting: all_beta(5),
                level: 0.95,
            },
            ScenarioId::Sim4 => {
                let mut v = vec![0.0; 6];
                v[1] = 1.0;
                let opt = Design::Surprise { objective: Objective::Direction(v), rate: RateSpec::MatchLcc };
                let ests = vec![
                    est("LCC", EstimatorKind::LccAdjusted { design: lcc() }),
                    est("HT-LCC", EstimatorKind::Ht { design: lcc() }),
                    est("HT-optimal", EstimatorKind::Ht { design: opt }),
                ];
                Scenario {
                    id,
                    title: "Direction-optimal surprise sampling versus local case-control".into(),
                    n: if desk { 100_000 } else { 1_000_000 },
                    family: Family::Logistic,
                    settings: vec![setting("Incorrect", k.sim2(), "sim2")],
                    arms: vec![arm(PilotKind::UniformMle, uniform_pilot, ests.clone()), arm(PilotKind::Wcc, wcc_pilot, ests)],
                    replications: reps,
                    seed,
                    reporting: Reporting { coordinates: vec![1], summed: false },
                    level: 0.95,
                }
            }
            ScenarioId::Sim5 | ScenarioId::Sim6 => {
                let (family, correct, incorrect, title) = if id == ScenarioId::Sim5 {
                    (Family::PoissonLog, (k.sim5_correct(), "sim5_correct"), (k.sim5_incorrect(), "sim5_incorrect"), "Counting response under the log-linear model")
                } else {
                    (Family::GaussianLinear, (k.sim6_correct(), "sim6_correct"), (k.sim6_incorrect(), "sim6_incorrect"), "Continuous response under the linear model")
                };
                let ests = vec![
                    est("Sub-MLE", EstimatorKind::UniformMle { size: 2_000 }),
                    est(
                        "HT",
                        EstimatorKind::Ht {
                            design: Design::Surprise { objective: Objective::Lcc, rate: RateSpec::ExpectedSize(1_000) },
                        },
                    ),
                ];
                Scenario {
                    id,
                    title: title.into(),
                    n: 100_000,
                    family,
                    settings: vec![setting("Correct", correct.0, correct.1), setting("Incorrect", incorrect.0, incorrect.1)],
                    arms: vec![arm(PilotKind::UniformMle, 1_000, ests)],
                    replications: reps,
                    seed,
                    reporting: Reporting { coordinates: vec![0, 1, 2], summed: false },
                    level: 0.95,
                }
            }
            ScenarioId::Custom => return None,
        };
        Some(sc)
    }
}
