//! Surprise sampling: objective-adaptive Poisson subsampling of large datasets
//! with Horvitz–Thompson weighted M-estimation and plug-in sandwich inference.
//!
//! The pipeline is
//!
//! 1. a pilot estimate `θ̃` with curvature `Ã` ([`pilot`]),
//! 2. per-row sampling kernels for the chosen objective and the rate constant
//!    `c` that caps `πᵢ = min(c·π̃ᵢ, 1)` at the target rate ([`design`]),
//! 3. independent Bernoulli draws and the weighted fit with sandwich
//!    covariance ([`estimator`]).
//!
//! [`simulation`] reproduces the Monte-Carlo studies built on this pipeline.

pub mod data;
pub mod design;
pub mod estimator;
pub mod linalg;
pub mod loss;
pub mod newton;
pub mod par;
pub mod pilot;
pub mod risk;
pub mod rng;
pub mod simulation;

pub use design::{draw, find_c, kernels, DesignError, Objective, SamplingPlan, Subsample};
pub use estimator::{fit_ht, lcc_adjusted_fit, wald_interval, FitError, FitOptions, FitResult};
pub use data::{augment, load_csv, read_csv, AugmentedCovariate, DataError, DataPoint, Dataset, PointRef};
pub use linalg::{inv_sqrt, solve_spd, LinalgError, SymmetricMatrix};
pub use loss::{Family, LossError, LossModel};
pub use pilot::{pilot_external, pilot_uniform_mle, pilot_wcc, PilotError, PilotEstimate, PilotMethod};
pub use newton::{newton_minimize, NewtonOptions, RiskFunction, SolverError, SolverReport};
