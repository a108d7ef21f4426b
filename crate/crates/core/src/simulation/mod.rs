//! Monte-Carlo studies: generators, calibrated constants, target oracles and
//! the replication engine.

pub mod armse;
pub mod calibration;
pub mod constants;
pub mod generate;
pub mod oracle;
pub mod run;
pub mod scenario;
pub mod summary;

pub use oracle::{true_target, OracleTarget};
pub use run::{replicate, run, RepResult, RunError, RunOptions};
pub use scenario::{Scale, Scenario, ScenarioId};
pub use summary::{render_text, write_csv, MonteCarloSummary};
