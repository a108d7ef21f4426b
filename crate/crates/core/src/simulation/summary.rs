//! Monte-Carlo aggregates and their text/CSV tables.

use std::fmt::Write as _;
use std::io::Write;

use crate::data::format_float;
use crate::estimator::normal_quantile;
use crate::simulation::oracle::true_target;
use crate::simulation::run::RepResult;
use crate::simulation::scenario::{Scenario, ScenarioId};

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateStats {
    pub index: usize,
    pub name: String,
    pub target: f64,
    pub mean: f64,
    /// `(mean − θ*)²`.
    pub bias2: f64,
    /// Sample variance across replications.
    pub variance: f64,
    /// Mean of the estimated variances `se²`.
    pub var_est: Option<f64>,
    /// Wald coverage in percent.
    pub coverage: Option<f64>,
}

/// Sums over the reported coordinates (coverage is averaged).
#[derive(Debug, Clone, PartialEq)]
pub struct Totals {
    pub bias2: f64,
    pub variance: f64,
    pub var_est: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub setting: String,
    pub arm: String,
    pub estimator: String,
    pub successes: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub mean_fraction: f64,
    pub coordinates: Vec<CoordinateStats>,
    pub totals: Option<Totals>,
    /// Full estimates of successful replications, in replication order.
    pub estimates: Vec<(usize, Vec<f64>)>,
    /// Standard errors aligned with `estimates`, when the estimator has them.
    pub std_errors: Vec<Option<Vec<f64>>>,
}

impl EstimatorSummary {
    /// Sample variance of coordinate `j` over successful replications.
    pub fn variance_of(&self, j: usize) -> f64 {
        sample_variance(&self.estimates.iter().map(|(_, t)| t[j]).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub scenario: ScenarioId,
    pub title: String,
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub targets: Vec<Vec<f64>>,
    pub rows: Vec<EstimatorSummary>,
    pub warnings: Vec<String>,
    pub mean_rep_seconds: f64,
}

impl MonteCarloSummary {
    pub fn row(&self, setting: &str, arm: &str, estimator: &str) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.setting == setting && r.arm == arm && r.estimator == estimator)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn coordinate_name(j: usize) -> String {
    if j == 0 {
        "alpha".into()
    } else {
        format!("beta{j}")
    }
}

/// Aggregate replication results. The input order does not matter.
pub fn summarize(sc: &Scenario, mut results: Vec<RepResult>) -> MonteCarloSummary {
    results.sort_by_key(|r| (r.setting, r.rep));
    let z = normal_quantile(sc.level).expect("validated level");
    let mut warnings = Vec::new();
    if sc.replications < 2 {
        warnings.push("a single replication gives a degenerate summary: variances are reported as zero".into());
    }
    let targets: Vec<Vec<f64>> = sc.settings.iter().map(|s| true_target(s, sc.family).0).collect();
    let mut rows = Vec::new();
    for (si, setting) in sc.settings.iter().enumerate() {
        let target = &targets[si];
        for (ai, arm) in sc.arms.iter().enumerate() {
            for (ei, spec) in arm.estimators.iter().enumerate() {
                let mut estimates = Vec::new();
                let mut std_errors = Vec::new();
                let mut fractions = Vec::new();
                let mut failures = 0;
                let mut first_failure = None;
                for r in results.iter().filter(|r| r.setting == si) {
                    match &r.outcomes[ai][ei] {
                        Ok(rec) => {
                            estimates.push((r.rep, rec.theta.clone()));
                            std_errors.push(rec.se.clone());
                            fractions.push(rec.subsample as f64 / sc.n as f64);
                        }
                        Err(e) => {
                            failures += 1;
                            first_failure.get_or_insert_with(|| e.clone());
                        }
                    }
                }
                let coordinates: Vec<CoordinateStats> = sc
                    .reporting
                    .coordinates
                    .iter()
                    .map(|&j| {
                        let vals: Vec<f64> = estimates.iter().map(|(_, t)| t[j]).collect();
                        let m = if vals.is_empty() { f64::NAN } else { mean(&vals) };
                        let ses: Vec<f64> = std_errors.iter().filter_map(|s| s.as_ref().map(|s| s[j])).collect();
                        let has_se = !ses.is_empty() && ses.len() == vals.len();
                        let var_est = has_se.then(|| mean(&ses.iter().map(|s| s * s).collect::<Vec<_>>()));
                        let coverage = has_se.then(|| {
                            let hits = vals.iter().zip(&ses).filter(|(v, s)| (*v - target[j]).abs() <= z * *s).count();
                            100.0 * hits as f64 / vals.len() as f64
                        });
                        CoordinateStats {
                            index: j,
                            name: coordinate_name(j),
                            target: target[j],
                            mean: m,
                            bias2: (m - target[j]).powi(2),
                            variance: sample_variance(&vals),
                            var_est,
                            coverage,
                        }
                    })
                    .collect();
                let totals = sc.reporting.summed.then(|| Totals {
                    bias2: coordinates.iter().map(|c| c.bias2).sum(),
                    variance: coordinates.iter().map(|c| c.variance).sum(),
                    var_est: coordinates.iter().map(|c| c.var_est).sum(),
                    coverage: coordinates
                        .iter()
                        .map(|c| c.coverage)
                        .sum::<Option<f64>>()
                        .map(|s| s / coordinates.len() as f64),
                });
                rows.push(EstimatorSummary {
                    setting: setting.label.clone(),
                    arm: arm.label.clone(),
                    estimator: spec.label.clone(),
                    successes: estimates.len(),
                    failures,
                    first_failure,
                    mean_fraction: if fractions.is_empty() { f64::NAN } else { mean(&fractions) },
                    coordinates,
                    totals,
                    estimates,
                    std_errors,
                });
            }
        }
    }
    let mean_rep_seconds = if results.is_empty() { 0.0 } else { results.iter().map(|r| r.seconds).sum::<f64>() / results.len() as f64 };
    MonteCarloSummary {
        scenario: sc.id,
        title: sc.title.clone(),
        n: sc.n,
        replications: sc.replications,
        level: sc.level,
        targets,
        rows,
        warnings,
        mean_rep_seconds,
    }
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "-".to_string(), f)
}

/// One line per (row, coordinate), plus a `sum` line for summed reports.
pub fn write_csv<W: Write>(s: &MonteCarloSummary, mut w: W) -> std::io::Result<()> {
    writeln!(w, "scenario,setting,pilot,estimator,coordinate,target,mean,bias2,variance,var_est,coverage,fraction,successes,failures")?;
    let na = |v: Option<f64>| v.map_or("NA".to_string(), format_float);
    for row in &s.rows {
        let head = format!("{},{},{},{}", s.scenario.as_str(), row.setting, row.arm, row.estimator);
        let tail = format!("{},{},{}", format_float(row.mean_fraction), row.successes, row.failures);
        for c in &row.coordinates {
            writeln!(
                w,
                "{head},{},{},{},{},{},{},{},{tail}",
                c.name,
                format_float(c.target),
                format_float(c.mean),
                format_float(c.bias2),
                format_float(c.variance),
                na(c.var_est),
                na(c.coverage),
            )?;
        }
        if let Some(t) = &row.totals {
            writeln!(
                w,
                "{head},sum,NA,NA,{},{},{},{},{tail}",
                format_float(t.bias2),
                format_float(t.variance),
                na(t.var_est),
                na(t.coverage),
            )?;
        }
    }
    Ok(())
}

/// Aligned plain-text table: one block per setting, one line per arm and estimator.
pub fn render_text(s: &MonteCarloSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({}): n = {}, {} replications", s.title, s.scenario.as_str(), s.n, s.replications);
    let header = ["Setting", "Pilot", "Estimation", "Coord", "Bias^2", "Var", "Var Est.", "CP (%)", "Fraction", "Fail"];
    let mut lines: Vec<[String; 10]> = Vec::new();
    let sci = |v: f64| format!("{v:.3e}");
    for row in &s.rows {
        let mut push = |coord: &str, b: f64, v: f64, ve: Option<f64>, cp: Option<f64>| {
            lines.push([
                row.setting.clone(),
                row.arm.clone(),
                row.estimator.clone(),
                coord.to_string(),
                sci(b),
                sci(v),
                opt(ve, sci),
                opt(cp, |c| format!("{c:.1}")),
                format!("{:.4}", row.mean_fraction),
                row.failures.to_string(),
            ]);
        };
        match &row.totals {
            Some(t) => push("sum", t.bias2, t.variance, t.var_est, t.coverage),
            None => {
                for c in &row.coordinates {
                    push(&c.name, c.bias2, c.variance, c.var_est, c.coverage);
                }
            }
        }
    }
    let mut widths = header.map(str::len);
    for l in &lines {
        for (w, cell) in widths.iter_mut().zip(l) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, w))| if k < 4 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let head: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    let _ = writeln!(out, "{rule}\n{}\n{rule}", fmt_line(&head));
    for l in &lines {
        let _ = writeln!(out, "{}", fmt_line(l));
    }
    let _ = writeln!(out, "{rule}");
    for w in &s.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "mean wall-clock per replication: {:.3} s", s.mean_rep_seconds);
    out
}
