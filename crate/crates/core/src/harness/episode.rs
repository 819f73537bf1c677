use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{GenerationConfig, ScenarioConfig};
use crate::allocation::{check_pairs, episode_utility, is_feasible, slot_utility, Allocation, RawAction};
use crate::backends::{CandidateBackend, GenerationRequest};
use crate::netenv::{Environment, NetworkState};
use crate::repair::repair;
use crate::seed::{self, stream};
use crate::serializer::{parse_action, serialize, DetailLevel};
use crate::solvers::{SolveContext, Solver};

pub enum MethodKind {
    Solver(Box<dyn Solver>),
    Generative(Box<dyn CandidateBackend>),
}

pub struct Method {
    pub label: String,
    pub kind: MethodKind,
}

impl std::fmt::Debug for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            MethodKind::Solver(s) => format!("solver {}", s.name()),
            MethodKind::Generative(b) => format!("backend {}", b.name()),
        };
        f.debug_struct("Method").field("label", &self.label).field("kind", &kind).finish()
    }
}

impl Method {
    pub fn new(label: &str, kind: MethodKind) -> Self {
        Self {
            label: label.to_string(),
            kind,
        }
    }

    pub fn is_generative(&self) -> bool {
        matches!(self.kind, MethodKind::Generative(_))
    }

    /// The method whose budget follows the generative latency in
    /// time-equated runs.
    pub fn is_grouped_km(&self) -> bool {
        matches!(&self.kind, MethodKind::Solver(s) if s.name() == "grouped_hungarian")
    }
}

/// Ordered by severity; an episode reports its worst slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    BudgetExceeded,
    Degraded,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::BudgetExceeded => "budget_exceeded",
            Self::Degraded => "degraded",
        }
    }
}

/// Settings shared by every episode of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub serializer_budget: usize,
    pub generation: GenerationConfig,
    /// Per-slot wall-clock budget handed to time-budgeted solvers.
    pub solver_budget: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    /// Discounted sum of per-slot sum-rates, bit/s.
    pub episode_throughput: f64,
    /// Mean per-slot decision time, seconds.
    pub mean_latency: f64,
    /// Share of generated candidates that were feasible before repair;
    /// 1.0 for solvers.
    pub valid_rate: f64,
    pub status: Status,
    pub slots: u64,
    /// Candidates judged for `valid_rate` (0 for solvers).
    pub candidates: usize,
    /// Deployments that failed the post-hoc feasibility audit.
    pub infeasible_deployments: usize,
    /// Time-budgeted slots that ran past budget plus one mean pass.
    pub budget_overruns: usize,
    /// Coarsest prompt detail level used over the episode.
    pub detail: Option<DetailLevel>,
    pub mean_prompt_tokens: Option<f64>,
    pub time_budget_s: Option<f64>,
    /// First error seen, if any slot fell back.
    pub error: Option<String>,
}

struct SlotOutcome {
    deployed: Allocation,
    status: Status,
    error: Option<String>,
    candidates: usize,
    valid: usize,
    detail: Option<DetailLevel>,
    prompt_tokens: Option<usize>,
    overrun: bool,
}

impl SlotOutcome {
    fn fallback(state: &NetworkState, status: Status, error: String) -> Self {
        Self {
            deployed: repair(&RawAction::new(), state).allocation,
            status,
            error: Some(error),
            candidates: 0,
            valid: 0,
            detail: None,
            prompt_tokens: None,
            overrun: false,
        }
    }
}

/// Pre-repair validity of one generated text.
pub fn is_valid_candidate(text: &str, state: &NetworkState) -> bool {
    parse_action(text).is_ok_and(|raw| {
        let pairs: Vec<_> = raw.into_iter().collect();
        check_pairs(&pairs, state).is_feasible()
    })
}

fn generative_slot(
    backend: &dyn CandidateBackend,
    state: &NetworkState,
    settings: &EpisodeSettings,
    seed: u64,
) -> SlotOutcome {
    let bundle = match serialize(state, settings.serializer_budget) {
        Ok(b) => b,
        Err(e) => return SlotOutcome::fallback(state, Status::BudgetExceeded, e.to_string()),
    };
    let request = GenerationRequest {
        prompt: bundle.prompt_text(),
        max_tokens: settings.generation.max_tokens,
        num_candidates: settings.generation.group_size,
        temperature: settings.generation.temperature,
        seed: seed::derive(seed, stream::GENERATE, state.slot()),
    };
    let response = match backend.generate(state, &request) {
        Ok(r) if !r.texts.is_empty() => r,
        Ok(_) => return SlotOutcome::fallback(state, Status::Degraded, "backend returned no candidates".into()),
        Err(e) => return SlotOutcome::fallback(state, Status::Degraded, e.to_string()),
    };

    let mut valid = 0;
    let mut best: Option<(f64, Allocation)> = None;
    for text in &response.texts {
        if is_valid_candidate(text, state) {
            valid += 1;
        }
        let raw = parse_action(text).unwrap_or_default();
        let repaired = repair(&raw, state).allocation;
        let utility = slot_utility(&repaired, state).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(u, _)| utility > *u) {
            best = Some((utility, repaired));
        }
    }
    SlotOutcome {
        deployed: best.expect("at least one candidate").1,
        status: Status::Ok,
        error: None,
        candidates: response.texts.len(),
        valid,
        detail: Some(bundle.detail),
        prompt_tokens: Some(bundle.token_estimate),
        overrun: false,
    }
}

fn solver_slot(solver: &dyn Solver, state: &NetworkState, settings: &EpisodeSettings, seed: u64) -> SlotOutcome {
    let ctx = SolveContext {
        seed: seed::derive(seed, stream::SOLVER, state.slot()),
        budget: settings.solver_budget,
    };
    match solver.solve(state, &ctx) {
        Ok(result) => {
            let overrun = settings.solver_budget.is_some_and(|budget| {
                result.iterations > 1 && result.elapsed > budget + result.elapsed / result.iterations as u32
            });
            SlotOutcome {
                deployed: result.allocation,
                status: Status::Ok,
                error: None,
                candidates: 0,
                valid: 0,
                detail: None,
                prompt_tokens: None,
                overrun,
            }
        }
        Err(e) => SlotOutcome::fallback(state, Status::Degraded, e.to_string()),
    }
}

/// One episode of `scenario` under `method`. Errors inside a slot fall back
/// to repairing an empty map and are reported through `status`.
pub fn run_episode(
    scenario: &ScenarioConfig,
    method: &Method,
    seed: u64,
    settings: &EpisodeSettings,
) -> Result<BenchRecord, String> {
    let env = Environment::new(scenario.env_config()?, seed).map_err(|e| e.to_string())?;
    let mut utilities = Vec::with_capacity(scenario.slots as usize);
    let mut latency = Duration::ZERO;
    let mut status = Status::Ok;
    let mut error = None;
    let (mut candidates, mut valid, mut infeasible, mut overruns) = (0, 0, 0, 0);
    let mut detail: Option<DetailLevel> = None;
    let mut prompt_tokens = Vec::new();

    for slot in 0..scenario.slots {
        let state = env.state(slot).map_err(|e| e.to_string())?;
        let started = Instant::now();
        let outcome = match &method.kind {
            MethodKind::Generative(b) => generative_slot(b.as_ref(), &state, settings, seed),
            MethodKind::Solver(s) => solver_slot(s.as_ref(), &state, settings, seed),
        };
        latency += started.elapsed();

        status = status.max(outcome.status);
        if error.is_none() {
            error = outcome.error;
        }
        candidates += outcome.candidates;
        valid += outcome.valid;
        overruns += usize::from(outcome.overrun);
        if let Some(d) = outcome.detail {
            detail = Some(detail.map_or(d, |cur| cur.min(d)));
        }
        prompt_tokens.extend(outcome.prompt_tokens);
        if !is_feasible(&outcome.deployed, &state).is_feasible() {
            infeasible += 1;
        }
        utilities.push(slot_utility(&outcome.deployed, &state).unwrap_or(0.0));
    }

    let valid_rate = match &method.kind {
        MethodKind::Solver(_) => 1.0,
        MethodKind::Generative(_) if candidates == 0 => 0.0,
        MethodKind::Generative(_) => valid as f64 / candidates as f64,
    };
    Ok(BenchRecord {
        scenario: scenario.id.clone(),
        method: method.label.clone(),
        seed,
        episode_throughput: episode_utility(&utilities, scenario.gamma),
        mean_latency: latency.as_secs_f64() / scenario.slots as f64,
        valid_rate,
        status,
        slots: scenario.slots,
        candidates,
        infeasible_deployments: infeasible,
        budget_overruns: overruns,
        detail,
        mean_prompt_tokens: (!prompt_tokens.is_empty())
            .then(|| prompt_tokens.iter().sum::<usize>() as f64 / prompt_tokens.len() as f64),
        time_budget_s: settings.solver_budget.map(|d| d.as_secs_f64()),
        error,
    })
}
