//! GRPO training runs driven by the `train` config section.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, ConfigError};
use crate::grpo::{evaluate_policy, train, ToyPolicy, TrainConfig, TrainingTrace};

/// Window for the head/tail reward means.
pub const CURVE_WINDOW: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub head_mean: f64,
    pub tail_mean: f64,
    /// Held-out score of the initial and trained policies.
    pub eval_initial: f64,
    pub eval_final: f64,
    pub trace: TrainingTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub scenario: String,
    pub runs: Vec<TrainRun>,
}

#[derive(Serialize)]
struct SummaryRow {
    seed: u64,
    head_mean: f64,
    tail_mean: f64,
    eval_initial: f64,
    eval_final: f64,
}

impl TrainReport {
    /// Every logged quantity is finite.
    pub fn audit_passed(&self) -> bool {
        self.runs.iter().all(|r| {
            r.eval_initial.is_finite()
                && r.eval_final.is_finite()
                && r.trace.steps.iter().all(|s| {
                    [s.total, s.r_struct_mean, s.r_perf_mean, s.r_depth_mean, s.objective, s.kl]
                        .iter()
                        .all(|v| v.is_finite())
                })
        })
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(SummaryRow {
                seed: r.seed,
                head_mean: r.head_mean,
                tail_mean: r.tail_mean,
                eval_initial: r.eval_initial,
                eval_final: r.eval_final,
            })
            .expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    /// `trace_seed{n}.csv` per run, `train_summary.csv` and `train.json`.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files: Vec<(String, String)> = self
            .runs
            .iter()
            .map(|r| (format!("trace_seed{}.csv", r.seed), r.trace.to_csv()))
            .collect();
        files.push(("train_summary.csv".into(), self.summary_csv()));
        files.push(("train.json".into(), serde_json::to_string_pretty(self)? + "\n"));
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn run_training(config: &BenchConfig) -> Result<TrainReport, ConfigError> {
    config.validate()?;
    let section = &config.train;
    let scenarios = config.resolve_scenarios()?;
    let scenario = match &section.scenario {
        Some(id) => scenarios
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| ConfigError::invalid("train.scenario", format!("no scenario `{id}`")))?,
        None => scenarios
            .first()
            .ok_or_else(|| ConfigError::invalid("scenarios", "no scenarios or presets"))?,
    };
    if section.seeds.is_empty() {
        return Err(ConfigError::invalid("train.seeds", "no seeds"));
    }
    let env = scenario
        .env_config()
        .map_err(|m| ConfigError::invalid(format!("scenario `{}`", scenario.id), m))?;
    let initial = section.initial_policy();
    let err = |e: crate::grpo::GrpoError| ConfigError::invalid("train", e);
    let eval = |p: &ToyPolicy| {
        evaluate_policy(p, &env, &config.reward, section.eval_seed, section.eval_slots, section.eval_samples)
            .map_err(err)
    };
    let eval_initial = eval(&initial)?;

    let mut runs = Vec::with_capacity(section.seeds.len());
    for &seed in &section.seeds {
        let cfg = TrainConfig {
            seed,
            ..section.grpo.clone()
        };
        let trace = train(&initial, &env, &config.reward, &cfg).map_err(err)?;
        let eval_final = eval(&trace.policy)?;
        runs.push(TrainRun {
            seed,
            head_mean: trace.head_mean(CURVE_WINDOW),
            tail_mean: trace.tail_mean(CURVE_WINDOW),
            eval_initial,
            eval_final,
            trace,
        });
    }
    Ok(TrainReport {
        scenario: scenario.id.clone(),
        runs,
    })
}
