//! Flags, config files, and the checked settings each command runs on.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use surprise::{Family, Objective};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "surprise", version, about = "Surprise subsampling with Horvitz-Thompson estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a subsample and write it with its inclusion probabilities.
    Sample(Options),
    /// Pilot, sample, and fit the weighted estimator with Wald intervals.
    Fit(Options),
    /// Run a Monte-Carlo scenario and write its summary tables.
    Simulate(Options),
    /// Verify a run directory against its manifest and print its tables.
    Report(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::Sample(o) | Command::Fit(o) | Command::Simulate(o) | Command::Report(o) => o,
        }
    }
}

/// Every setting, as a flag and as a config-file key. Flags win over the file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// TOML file supplying any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Response column name [default: y].
    #[arg(long)]
    pub response: Option<String>,
    /// logistic, poisson, gaussian or probit [default: logistic].
    #[arg(long)]
    pub loss: Option<String>,
    /// prediction, direction, mse, lcc or uniform [default: prediction].
    #[arg(long)]
    pub objective: Option<String>,
    /// Comma-separated v for the direction objective, intercept first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction_vector: Option<Vec<f64>>,
    /// Target sampling rate in (0, 1). Without it, lcc uses c = 1.
    #[arg(long)]
    pub rate: Option<f64>,
    /// uniform-mle, wcc or external [default: uniform-mle].
    #[arg(long)]
    pub pilot: Option<String>,
    /// Pilot subsample size [default: min(1000, n)].
    #[arg(long)]
    pub pilot_size: Option<usize>,
    /// One-column CSV holding an external pilot, intercept first.
    #[arg(long)]
    pub pilot_file: Option<PathBuf>,
    /// External pilot given inline (config file only).
    #[arg(skip)]
    pub pilot_theta: Option<Vec<f64>>,
    /// Master seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications for simulate (overrides the scenario).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Built-in scenario (sim1..sim6) or a scenario TOML file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// desk or full sizes for built-in scenarios [default: desk].
    #[arg(long)]
    pub scale: Option<String>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core [default: 0].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Center and scale covariates before anything else.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Floor on inclusion probabilities (requires --rate).
    #[arg(long)]
    pub min_prob: Option<f64>,
    /// Replace covariates by ln(x + offset) before standardizing.
    #[arg(long, allow_hyphen_values = true)]
    pub log_offset: Option<f64>,
    /// Confidence level of the Wald intervals [default: 0.95].
    #[arg(long)]
    pub level: Option<f64>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($f:ident),+ $(,)?) => {
        Options { config: $flags.config.clone(), $($f: $flags.$f.clone().or($file.$f)),+ }
    };
}

impl Options {
    /// Read the config file (if any) and lay the flags over it.
    pub fn resolve(&self) -> Result<Options, CliError> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: Options =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        rebase(&mut file.data);
        rebase(&mut file.pilot_file);
        rebase(&mut file.out);
        if let Some(s) = &mut file.scenario {
            if s.ends_with(".toml") && Path::new(s).is_relative() {
                *s = base.join(&*s).to_string_lossy().into_owned();
            }
        }
        Ok(overlay!(
            self, file, data, response, loss, objective, direction_vector, rate, pilot, pilot_size, pilot_file,
            pilot_theta, seed, reps, scenario, scale, out, workers, standardize, min_prob, log_offset, level,
        ))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveChoice {
    Core(Objective),
    /// Equal kernels: uniform Poisson sampling at the target rate.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PilotChoice {
    UniformMle(Option<usize>),
    Wcc(Option<usize>),
    External(Vec<f64>),
}

/// Checked settings for `sample` and `fit`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub data: PathBuf,
    pub response: String,
    pub family: Family,
    pub objective: ObjectiveChoice,
    pub rate: Option<f64>,
    pub pilot: PilotChoice,
    pub seed: u64,
    pub standardize: bool,
    pub min_prob: Option<f64>,
    pub log_offset: Option<f64>,
    pub level: f64,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn read_pilot_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read pilot file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            // A non-numeric first line is a header.
            Err(_) if k == 0 => {}
            _ => return usage(format!("pilot file {}: line {} is not a number", path.display(), k + 1)),
        }
    }
    if out.is_empty() {
        return usage(format!("pilot file {} holds no values", path.display()));
    }
    Ok(out)
}

impl Pipeline {
    pub fn from_options(o: &Options) -> Result<Self, CliError> {
        let Some(data) = o.data.clone() else {
            return usage("--data is required");
        };
        let family: Family = match &o.loss {
            None => Family::Logistic,
            Some(s) => s.parse().map_err(|_| CliError::Usage(format!("unknown loss '{s}'")))?,
        };
        let objective = match o.objective.as_deref().unwrap_or("prediction") {
            "prediction" => ObjectiveChoice::Core(Objective::Prediction),
            "mse" => ObjectiveChoice::Core(Objective::Mse),
            "lcc" => ObjectiveChoice::Core(Objective::Lcc),
            "uniform" => ObjectiveChoice::Uniform,
            "direction" => match &o.direction_vector {
                Some(v) => ObjectiveChoice::Core(Objective::Direction(v.clone())),
                None => return usage("--objective direction needs --direction-vector"),
            },
            other => return usage(format!("unknown objective '{other}'")),
        };
        if o.direction_vector.is_some() && !matches!(objective, ObjectiveChoice::Core(Objective::Direction(_))) {
            return usage("--direction-vector only applies to --objective direction");
        }
        if let Some(r) = o.rate {
            if !(r > 0.0 && r < 1.0) {
                return usage(format!("--rate {r} must lie in (0, 1)"));
            }
        } else if objective != ObjectiveChoice::Core(Objective::Lcc) {
            return usage("--rate is required unless --objective lcc (which then uses c = 1)");
        }
        if let Some(m) = o.min_prob {
            match o.rate {
                None => return usage("--min-prob needs --rate"),
                Some(r) if !(m > 0.0 && m <= r) => return usage(format!("--min-prob {m} must lie in (0, rate]")),
                _ => {}
            }
        }
        let pilot = match o.pilot.as_deref().unwrap_or("uniform-mle") {
            "uniform-mle" | "uniform" => PilotChoice::UniformMle(o.pilot_size),
            "wcc" => {
                if family != Family::Logistic {
                    return usage("--pilot wcc needs --loss logistic");
                }
                PilotChoice::Wcc(o.pilot_size)
            }
            "external" => match (&o.pilot_file, &o.pilot_theta) {
                (Some(p), _) => PilotChoice::External(read_pilot_file(p)?),
                (None, Some(t)) => PilotChoice::External(t.clone()),
                (None, None) => return usage("--pilot external needs --pilot-file or pilot-theta in the config"),
            },
            other => return usage(format!("unknown pilot '{other}'")),
        };
        if o.pilot_size == Some(0) {
            return usage("--pilot-size must be positive");
        }
        let level = o.level.unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return usage(format!("--level {level} must lie in (0, 1)"));
        }
        if let Some(off) = o.log_offset {
            if !off.is_finite() {
                return usage("--log-offset must be finite");
            }
        }
        Ok(Pipeline {
            data,
            response: o.response.clone().unwrap_or_else(|| "y".into()),
            family,
            objective,
            rate: o.rate,
            pilot,
            seed: o.seed(),
            standardize: o.standardize.unwrap_or(false),
            min_prob: o.min_prob,
            log_offset: o.log_offset,
            level,
        })
    }
}
