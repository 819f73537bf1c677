//! Monte Carlo benchmark over scenarios x methods x seeds.
//!
//! Output files (schema version [`CSV_SCHEMA_VERSION`]):
//!
//! - `records.csv`: scenario, method, seed, episode_throughput, valid_rate,
//!   status, slots, candidates, infeasible_deployments
//! - `summary.csv`: scenario, method, runs, mean_throughput,
//!   stderr_throughput, mean_valid_rate, ok, budget_exceeded, degraded
//! - `latency.csv`: scenario, method, seed, mean_latency_s, time_budget_s
//! - `results.json`: everything above plus warnings and the audit
//!
//! The two first files hold no wall-clock quantities and are byte-identical
//! across re-runs as long as no method is time-budgeted.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, ConfigError};
use super::episode::{run_episode, BenchRecord, EpisodeSettings, Method, Status};
use crate::backends::BackendRegistry;
use crate::solvers::SolverRegistry;

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub runs: usize,
    pub mean_throughput: f64,
    /// Standard error of the mean over seeds.
    pub stderr_throughput: f64,
    pub mean_valid_rate: f64,
    pub ok: usize,
    pub budget_exceeded: usize,
    pub degraded: usize,
    pub mean_latency: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub infeasible_deployments: usize,
    /// Solver records whose valid rate is not exactly 1.
    pub solver_valid_rate_violations: usize,
    pub budget_overruns: usize,
}

impl Audit {
    pub fn passed(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
    pub warnings: Vec<String>,
    pub audit: Audit,
}

#[derive(Serialize)]
struct RecordRow<'a> {
    scenario: &'a str,
    method: &'a str,
    seed: u64,
    episode_throughput: f64,
    valid_rate: f64,
    status: &'static str,
    slots: u64,
    candidates: usize,
    infeasible_deployments: usize,
}

#[derive(Serialize)]
struct SummaryCsvRow<'a> {
    scenario: &'a str,
    method: &'a str,
    runs: usize,
    mean_throughput: f64,
    stderr_throughput: f64,
    mean_valid_rate: f64,
    ok: usize,
    budget_exceeded: usize,
    degraded: usize,
}

#[derive(Serialize)]
struct LatencyRow<'a> {
    scenario: &'a str,
    method: &'a str,
    seed: u64,
    mean_latency_s: f64,
    time_budget_s: Option<f64>,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// Mean and standard error of the mean (sample standard deviation).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl BenchReport {
    pub fn records_csv(&self) -> String {
        to_csv(self.records.iter().map(|r| RecordRow {
            scenario: &r.scenario,
            method: &r.method,
            seed: r.seed,
            episode_throughput: r.episode_throughput,
            valid_rate: r.valid_rate,
            status: r.status.as_str(),
            slots: r.slots,
            candidates: r.candidates,
            infeasible_deployments: r.infeasible_deployments,
        }))
    }

    pub fn summary_csv(&self) -> String {
        to_csv(self.summary.iter().map(|s| SummaryCsvRow {
            scenario: &s.scenario,
            method: &s.method,
            runs: s.runs,
            mean_throughput: s.mean_throughput,
            stderr_throughput: s.stderr_throughput,
            mean_valid_rate: s.mean_valid_rate,
            ok: s.ok,
            budget_exceeded: s.budget_exceeded,
            degraded: s.degraded,
        }))
    }

    pub fn latency_csv(&self) -> String {
        to_csv(self.records.iter().map(|r| LatencyRow {
            scenario: &r.scenario,
            method: &r.method,
            seed: r.seed,
            mean_latency_s: r.mean_latency,
            time_budget_s: r.time_budget_s,
        }))
    }

    pub fn row(&self, scenario: &str, method: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.scenario == scenario && s.method == method)
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("records.csv", self.records_csv()),
            ("summary.csv", self.summary_csv()),
            ("latency.csv", self.latency_csv()),
            ("results.json", serde_json::to_string_pretty(self)? + "\n"),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<((&str, &str), Vec<&BenchRecord>)> = Vec::new();
    for r in records {
        let key = (r.scenario.as_str(), r.method.as_str());
        match groups.last_mut() {
            Some((k, v)) if *k == key => v.push(r),
            _ => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((scenario, method), rs)| {
            let throughput: Vec<f64> = rs.iter().map(|r| r.episode_throughput).collect();
            let (mean_throughput, stderr_throughput) = mean_stderr(&throughput);
            let n = rs.len() as f64;
            let count = |s: Status| rs.iter().filter(|r| r.status == s).count();
            SummaryRow {
                scenario: scenario.to_string(),
                method: method.to_string(),
                runs: rs.len(),
                mean_throughput,
                stderr_throughput,
                mean_valid_rate: rs.iter().map(|r| r.valid_rate).sum::<f64>() / n,
                ok: count(Status::Ok),
                budget_exceeded: count(Status::BudgetExceeded),
                degraded: count(Status::Degraded),
                mean_latency: rs.iter().map(|r| r.mean_latency).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Runs every (scenario, method, seed) cell. In time-equated mode the
/// generative methods of a cell run first and `grouped_hungarian` gets their
/// largest mean per-slot latency as its per-slot budget.
pub fn run_benchmark(
    config: &BenchConfig,
    solvers: &SolverRegistry,
    backends: &BackendRegistry,
) -> Result<BenchReport, ConfigError> {
    let warnings = config.validate()?;
    let scenarios = config.resolve_scenarios()?;
    if scenarios.is_empty() {
        return Err(ConfigError::invalid("scenarios", "no scenarios or presets"));
    }
    if config.methods.is_empty() {
        return Err(ConfigError::invalid("methods", "no methods"));
    }
    let methods = config.build_methods(solvers, backends)?;
    let seeds = config.seeds.seeds();
    let base = EpisodeSettings {
        serializer_budget: config.serializer_budget,
        generation: config.generation,
        solver_budget: None,
    };

    let mut order: Vec<&Method> = methods.iter().filter(|m| m.is_generative()).collect();
    order.extend(methods.iter().filter(|m| !m.is_generative()));

    let mut records = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for &seed in &seeds {
            let mut generative_latency: Option<f64> = None;
            for method in &order {
                let settings = if config.time_equated && method.is_grouped_km() {
                    EpisodeSettings {
                        solver_budget: generative_latency.map(Duration::from_secs_f64),
                        ..base
                    }
                } else {
                    base
                };
                let record = run_episode(scenario, method, seed, &settings)
                    .map_err(|m| ConfigError::invalid(format!("scenario `{}`", scenario.id), m))?;
                if method.is_generative() {
                    generative_latency = Some(generative_latency.unwrap_or(0.0).max(record.mean_latency));
                }
                let mi = methods.iter().position(|m| m.label == method.label).expect("own method");
                records.push(((si, mi, seed), record));
            }
        }
    }
    records.sort_by_key(|(key, _)| *key);
    let records: Vec<BenchRecord> = records.into_iter().map(|(_, r)| r).collect();

    let solver_labels: BTreeMap<&str, bool> = methods
        .iter()
        .map(|m| (m.label.as_str(), !m.is_generative()))
        .collect();
    let audit = Audit {
        infeasible_deployments: records.iter().map(|r| r.infeasible_deployments).sum(),
        solver_valid_rate_violations: records
            .iter()
            .filter(|r| solver_labels[r.method.as_str()] && r.valid_rate != 1.0)
            .count(),
        budget_overruns: records.iter().map(|r| r.budget_overruns).sum(),
    };
    Ok(BenchReport {
        schema_version: CSV_SCHEMA_VERSION,
        summary: summarize(&records),
        records,
        warnings,
        audit,
    })
}
