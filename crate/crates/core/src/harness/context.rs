//! Generative path at several serializer budgets.

use serde::{Deserialize, Serialize};

use super::benchmark::mean_stderr;
use super::config::{GenerationConfig, ScenarioConfig};
use super::episode::{run_episode, EpisodeSettings, Method, Status};
use crate::serializer::{DetailLevel, SerializeError, MIN_BUDGET_TOKENS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRow {
    pub scenario: String,
    pub method: String,
    pub budget: usize,
    /// Coarsest detail level over all slots and seeds.
    pub detail: Option<DetailLevel>,
    pub mean_prompt_tokens: Option<f64>,
    pub mean_throughput: Option<f64>,
    pub mean_valid_rate: Option<f64>,
    pub mean_latency: Option<f64>,
    pub status: Status,
    pub infeasible_deployments: usize,
    pub error: Option<String>,
}

impl ContextRow {
    fn flagged(scenario: &ScenarioConfig, method: &Method, budget: usize, error: String) -> Self {
        Self {
            scenario: scenario.id.clone(),
            method: method.label.clone(),
            budget,
            detail: None,
            mean_prompt_tokens: None,
            mean_throughput: None,
            mean_valid_rate: None,
            mean_latency: None,
            status: Status::BudgetExceeded,
            infeasible_deployments: 0,
            error: Some(error),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    method: &'a str,
    budget: usize,
    detail: String,
    mean_prompt_tokens: Option<f64>,
    mean_throughput: Option<f64>,
    mean_valid_rate: Option<f64>,
    status: &'static str,
    error: Option<&'a str>,
}

/// Latency is left out so the file stays reproducible.
pub fn context_csv(rows: &[ContextRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            scenario: &r.scenario,
            method: &r.method,
            budget: r.budget,
            detail: r.detail.map(|d| d.to_string()).unwrap_or_default(),
            mean_prompt_tokens: r.mean_prompt_tokens,
            mean_throughput: r.mean_throughput,
            mean_valid_rate: r.mean_valid_rate,
            status: r.status.as_str(),
            error: r.error.as_deref(),
        })
        .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// One row per budget, in the given order. Budgets below the serializer
/// minimum produce a flagged row instead of an error.
pub fn compare_context_budgets(
    scenario: &ScenarioConfig,
    method: &Method,
    budgets: &[usize],
    seeds: &[u64],
    generation: GenerationConfig,
) -> Result<Vec<ContextRow>, String> {
    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        if budget < MIN_BUDGET_TOKENS {
            let e = SerializeError::BudgetTooSmall {
                budget,
                minimum: MIN_BUDGET_TOKENS,
            };
            rows.push(ContextRow::flagged(scenario, method, budget, e.to_string()));
            continue;
        }
        let settings = EpisodeSettings {
            serializer_budget: budget,
            generation,
            solver_budget: None,
        };
        let records = seeds
            .iter()
            .map(|&seed| run_episode(scenario, method, seed, &settings))
            .collect::<Result<Vec<_>, _>>()?;
        let n = records.len() as f64;
        let throughput: Vec<f64> = records.iter().map(|r| r.episode_throughput).collect();
        let tokens: Vec<f64> = records.iter().filter_map(|r| r.mean_prompt_tokens).collect();
        rows.push(ContextRow {
            scenario: scenario.id.clone(),
            method: method.label.clone(),
            budget,
            detail: records.iter().filter_map(|r| r.detail).min(),
            mean_prompt_tokens: (!tokens.is_empty()).then(|| tokens.iter().sum::<f64>() / tokens.len() as f64),
            mean_throughput: Some(mean_stderr(&throughput).0),
            mean_valid_rate: Some(records.iter().map(|r| r.valid_rate).sum::<f64>() / n),
            mean_latency: Some(records.iter().map(|r| r.mean_latency).sum::<f64>() / n),
            status: records.iter().map(|r| r.status).max().unwrap_or(Status::Ok),
            infeasible_deployments: records.iter().map(|r| r.infeasible_deployments).sum(),
            error: records.iter().find_map(|r| r.error.clone()),
        });
    }
    Ok(rows)
}
