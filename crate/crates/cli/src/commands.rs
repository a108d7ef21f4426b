use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use surprise::data::format_float;
use surprise::estimator::coordinate_names;
use surprise::rng::{purpose, stream};
use surprise::simulation::{self, RunError, RunOptions, Scale, Scenario, ScenarioId};
use surprise::{
    draw, fit_ht, kernels, load_csv, pilot_external, pilot_uniform_mle, pilot_wcc, DataError, Dataset, FitOptions,
    LossModel, NewtonOptions, PilotError, PilotEstimate, SamplingPlan, Subsample,
};

use crate::config::{Command, ObjectiveChoice, Options, PilotChoice, Pipeline};
use crate::error::CliError;
use crate::manifest::{now_unix, FileDigest, Manifest, FILE_NAME};

const DEFAULT_PILOT_SIZE: usize = 1000;

/// Files gathered in memory and written together once the command succeeds.
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new() }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn write(self, dir: &Path, mut manifest: Manifest, clock: Instant) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            manifest.outputs.push(FileDigest::of_bytes(name.as_str(), bytes));
        }
        manifest.wall_seconds = clock.elapsed().as_secs_f64();
        std::fs::write(dir.join(FILE_NAME), manifest.to_toml()?)?;
        Ok(())
    }
}

fn data_error(e: DataError) -> CliError {
    match e {
        DataError::Io(_) | DataError::MissingResponseColumn(_) => CliError::Usage(e.to_string()),
        other => CliError::runtime(other),
    }
}

fn pilot_error(e: PilotError) -> CliError {
    match e {
        PilotError::Precondition(_) => CliError::Usage(e.to_string()),
        other => CliError::runtime(other),
    }
}

/// Everything up to the Bernoulli draw.
struct Drawn {
    /// Rows as read, before any transform.
    raw: Dataset,
    /// Rows the pilot and estimator work on.
    data: Dataset,
    model: LossModel,
    pilot: PilotEstimate,
    plan: SamplingPlan,
    sub: Subsample,
    warnings: Vec<String>,
}

fn load(p: &Pipeline) -> Result<(Dataset, Dataset), CliError> {
    let raw = load_csv(&p.data, Some(&p.response), false).map_err(data_error)?;
    let mut data = raw.clone();
    if let Some(off) = p.log_offset {
        data = data.log_transform(off).map_err(data_error)?;
    }
    if p.standardize {
        data = data.standardize().map_err(data_error)?;
    }
    Ok((raw, data))
}

fn draw_pipeline(p: &Pipeline) -> Result<Drawn, CliError> {
    let (raw, data) = load(p)?;
    let model = LossModel::for_covariates(p.family, data.q());
    let newton = NewtonOptions::default();
    let mut rng = stream(p.seed, &[purpose::PILOT]);
    let default_size = DEFAULT_PILOT_SIZE.min(data.n());
    let pilot = match &p.pilot {
        PilotChoice::UniformMle(size) => {
            pilot_uniform_mle(&data, model, size.unwrap_or(default_size), &mut rng, &newton)
        }
        PilotChoice::Wcc(size) => pilot_wcc(&data, size.unwrap_or(default_size & !1), &mut rng, &newton),
        PilotChoice::External(theta) => {
            if theta.len() != model.dim() {
                return Err(CliError::Usage(format!(
                    "external pilot has {} values but the model has {} parameters",
                    theta.len(),
                    model.dim()
                )));
            }
            pilot_external(theta, &data, model)
        }
    }
    .map_err(pilot_error)?;

    let k = match &p.objective {
        ObjectiveChoice::Uniform => vec![1.0; data.n()],
        ObjectiveChoice::Core(obj) => kernels(&data, model, &pilot, obj).map_err(|e| match e {
            surprise::DesignError::DirectionLength { .. } | surprise::DesignError::InvalidDirection => {
                CliError::Usage(e.to_string())
            }
            other => CliError::runtime(other),
        })?,
    };
    let plan = match (p.rate, p.min_prob) {
        (Some(r), Some(m)) => SamplingPlan::at_rate_with_floor(k, r, m),
        (Some(r), None) => SamplingPlan::at_rate(k, r),
        (None, _) => SamplingPlan::with_constant(k, 1.0),
    }
    .map_err(CliError::runtime)?;
    let sub = draw(&plan, &mut stream(p.seed, &[purpose::DRAW]));
    let mut warnings = pilot.warnings.clone();
    warnings.extend(plan.warnings.iter().cloned());
    Ok(Drawn { raw, data, model, pilot, plan, sub, warnings })
}

fn subsample_csv(raw: &Dataset, sub: &Subsample, plan: &SamplingPlan) -> Vec<u8> {
    let mut s = String::from("row,weight,prob");
    if let Some(name) = raw.response_name() {
        let _ = write!(s, ",{name}");
    }
    for c in raw.column_names() {
        let _ = write!(s, ",{c}");
    }
    s.push('\n');
    for (&i, &w) in sub.indices.iter().zip(&sub.weights) {
        let _ = write!(s, "{i},{},{}", format_float(w), format_float(plan.probs[i]));
        if let Some(y) = raw.y(i) {
            let _ = write!(s, ",{}", format_float(y));
        }
        for v in raw.x(i) {
            let _ = write!(s, ",{}", format_float(*v));
        }
        s.push('\n');
    }
    s.into_bytes()
}

fn plan_csv(plan: &SamplingPlan) -> Vec<u8> {
    let mut s = String::from("index,kernel,prob\n");
    for (i, (k, p)) in plan.kernels.iter().zip(&plan.probs).enumerate() {
        let _ = writeln!(s, "{i},{},{}", format_float(*k), format_float(*p));
    }
    s.into_bytes()
}

fn describe(d: &Drawn) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "pilot {} on {} rows; c = {}; expected size {:.1}; drew {} of {} rows",
        d.pilot.method.as_str(),
        d.pilot.pilot_size,
        format_float(d.plan.c),
        d.plan.expected_size(),
        d.sub.len(),
        d.data.n()
    );
    s
}

fn cmd_sample(o: &Options, manifest: &mut Manifest, out: &mut Outputs) -> Result<String, CliError> {
    let p = Pipeline::from_options(o)?;
    let d = draw_pipeline(&p)?;
    manifest.inputs.push(FileDigest::of_file(&p.data)?);
    manifest.warnings.extend(d.warnings.iter().cloned());
    out.add("subsample.csv", subsample_csv(&d.raw, &d.sub, &d.plan));
    out.add("plan.csv", plan_csv(&d.plan));
    Ok(describe(&d))
}

fn cmd_fit(o: &Options, manifest: &mut Manifest, out: &mut Outputs) -> Result<String, CliError> {
    let p = Pipeline::from_options(o)?;
    let d = draw_pipeline(&p)?;
    manifest.inputs.push(FileDigest::of_file(&p.data)?);
    manifest.warnings.extend(d.warnings.iter().cloned());
    let opts = FitOptions { level: p.level, ..FitOptions::default() };
    let fit = fit_ht(&d.data, d.model, &d.sub, Some(&d.pilot.theta_tilde), &opts).map_err(CliError::runtime)?;
    if let Some(w) = &fit.inference_warning {
        manifest.warnings.push(w.clone());
    }
    let names = coordinate_names(&d.data);
    let mut csv = Vec::new();
    fit.write_csv(&mut csv, &names)?;
    out.add("estimates.csv", csv);

    let mut text = describe(&d);
    let _ = writeln!(text, "{:<14} {:>14} {:>12} {:>14} {:>14}", "coordinate", "estimate", "se", "ci_lo", "ci_hi");
    for (j, name) in names.iter().enumerate() {
        let se = fit.std_errors.as_ref().map(|s| s[j]);
        let ci = fit.wald_ci.as_ref().map(|c| c[j]);
        let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            text,
            "{name:<14} {:>14.6} {:>12} {:>14} {:>14}",
            fit.theta_hat[j],
            cell(se),
            cell(ci.map(|c| c.0)),
            cell(ci.map(|c| c.1))
        );
    }
    Ok(text)
}

fn load_scenario(o: &Options) -> Result<Scenario, CliError> {
    let Some(name) = o.scenario.as_deref() else {
        return Err(CliError::Usage("--scenario is required".into()));
    };
    let scale = match o.scale.as_deref().unwrap_or("desk") {
        "desk" => Scale::Desk,
        "full" => Scale::Full,
        other => return Err(CliError::Usage(format!("unknown scale '{other}' (expected desk or full)"))),
    };
    let mut sc = if Path::new(name).extension().is_some_and(|e| e == "toml") {
        let text = std::fs::read_to_string(name)
            .map_err(|e| CliError::Usage(format!("cannot read scenario {name}: {e}")))?;
        toml::from_str::<Scenario>(&text).map_err(|e| CliError::Usage(format!("scenario {name}: {e}")))?
    } else {
        let id = ScenarioId::parse(name)
            .filter(|id| *id != ScenarioId::Custom)
            .ok_or_else(|| CliError::Usage(format!("unknown scenario '{name}' (expected sim1..sim6 or a .toml file)")))?;
        Scenario::builtin(id, scale).expect("built-in scenario")
    };
    if let Some(r) = o.reps {
        sc.replications = r;
    }
    if let Some(s) = o.seed {
        sc.seed = s;
    }
    sc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(sc)
}

fn cmd_simulate(o: &Options, manifest: &mut Manifest, out: &mut Outputs) -> Result<String, CliError> {
    let sc = load_scenario(o)?;
    manifest.seed = sc.seed;
    manifest.config.seed = Some(sc.seed);
    let (summary, failure) = match simulation::run(&sc, &RunOptions { workers: o.workers(), ..Default::default() }) {
        Ok(s) => (s, None),
        Err(RunError::TooManyFailures { label, failures, total, first, summary }) => {
            let msg = format!("{label}: {failures} of {total} replications failed (first: {first})");
            (*summary, Some(msg))
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let mut csv = Vec::new();
    simulation::write_csv(&summary, &mut csv)?;
    let text = simulation::render_text(&summary);
    out.add("summary.csv", csv);
    out.add("summary.txt", text.clone().into_bytes());
    manifest.warnings.extend(summary.warnings.iter().cloned());
    match failure {
        Some(msg) => {
            manifest.warnings.push(msg.clone());
            Err(CliError::Runtime(msg))
        }
        None => Ok(text),
    }
}

fn cmd_report(o: &Options) -> Result<String, CliError> {
    let dir = o.out_dir();
    let m = Manifest::read(&dir)?;
    let stale = m.stale_outputs(&dir);
    if !stale.is_empty() {
        return Err(CliError::Runtime(format!("outputs changed since the run: {}", stale.join(", "))));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {} (seed {}), {} outputs verified", m.tool, m.version, m.command, m.seed, m.outputs.len());
    for w in &m.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let listed = |name: &str| m.outputs.iter().any(|d| d.path == name);
    let show = |name: &str| listed(name).then(|| std::fs::read_to_string(dir.join(name)).ok()).flatten();
    if let Some(t) = show("summary.txt") {
        s.push_str(&t);
    } else if let Some(t) = show("estimates.csv") {
        s.push_str(&align_csv(&t));
    } else {
        for d in &m.outputs {
            let _ = writeln!(s, "{}  {} bytes  sha256 {}", d.path, d.bytes, d.sha256);
        }
    }
    Ok(s)
}

fn align_csv(text: &str) -> String {
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.len()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", line.join("  "));
    }
    s
}

/// Run one command; files are only written when it gets far enough to have them.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let clock = Instant::now();
    let started = now_unix();
    let o = command.options().resolve()?;
    if let Command::Report(_) = command {
        return cmd_report(&o);
    }
    let mut manifest = Manifest::new(command.name(), &o, started);
    let mut out = Outputs::new();
    let dir: PathBuf = o.out_dir();
    let result = surprise::par::with_workers(o.workers(), || match command {
        Command::Sample(_) => cmd_sample(&o, &mut manifest, &mut out),
        Command::Fit(_) => cmd_fit(&o, &mut manifest, &mut out),
        Command::Simulate(_) => cmd_simulate(&o, &mut manifest, &mut out),
        Command::Report(_) => unreachable!(),
    });
    if !out.files.is_empty() {
        out.write(&dir, manifest, clock)?;
    }
    result
}
