//! Group-relative policy optimization on the toy policy, plus the maximum
//! likelihood warm start.

pub mod policy;

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::RawAction;
use crate::netenv::{EnvConfig, Environment, NetEnvError, NetworkState};
use crate::reward::{reward_total, RewardBreakdown, RewardWeights};
use crate::seed::{self, stream};
use crate::serializer::render_code_block;
use crate::solvers::solve_hungarian;

pub use policy::{accumulate_kl_grad, decision_kl, Decision, Layout, ToyPolicy, GREEDY_TEMPERATURE};

/// Rendered candidates are padded to at least this many estimated tokens.
pub const MIN_OUTPUT_TOKENS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrpoError {
    #[error("candidate cannot be produced by the sampler: {0}")]
    UnreachableCandidate(String),
    #[error("policy shape or parameters are invalid")]
    InvalidPolicy,
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Env(#[from] NetEnvError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub raw_map: RawAction,
    pub rendered_text: String,
    pub decisions: Vec<Decision>,
    pub logprob_current: f64,
    pub logprob_ref: f64,
    pub reward: f64,
    pub breakdown: Option<RewardBreakdown>,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub candidates: Vec<Candidate>,
    pub slot: u64,
    pub mu_r: f64,
    pub sigma_r: f64,
}

/// Candidate text: the action dictionary in a code block padded to clear the
/// depth threshold.
pub fn render_candidate(map: &RawAction) -> String {
    render_code_block(map, MIN_OUTPUT_TOKENS)
}

/// `g` independent rollouts. `logprob_ref` starts equal to `logprob_current`;
/// see [`CandidateGroup::set_reference`].
pub fn sample_group(
    policy: &ToyPolicy,
    state: &NetworkState,
    g: usize,
    seed: u64,
) -> Result<CandidateGroup, GrpoError> {
    if g < 2 {
        return Err(GrpoError::InvalidParams("group size must be at least 2".into()));
    }
    policy.validate()?;
    let layout = policy.layout(state);
    let candidates = (0..g)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(seed, stream::POLICY, i as u64));
            let (decisions, raw_map) = policy.rollout(&layout, &mut rng);
            let lp = policy.sequence_log_prob(&decisions);
            Candidate {
                rendered_text: render_candidate(&raw_map),
                raw_map,
                decisions,
                logprob_current: lp,
                logprob_ref: lp,
                reward: 0.0,
                breakdown: None,
                advantage: 0.0,
            }
        })
        .collect();
    Ok(CandidateGroup {
        candidates,
        slot: state.slot(),
        mu_r: 0.0,
        sigma_r: 0.0,
    })
}

impl CandidateGroup {
    pub fn set_reference(&mut self, reference: &ToyPolicy) {
        for c in &mut self.candidates {
            c.logprob_ref = reference.sequence_log_prob(&c.decisions);
        }
    }

    /// Scores each rendered candidate with the raw-text reward and fills in
    /// group statistics and advantages.
    pub fn score(&mut self, state: &NetworkState, weights: &RewardWeights, seed: u64, adv_eps: f64) {
        for (i, c) in self.candidates.iter_mut().enumerate() {
            let b = reward_total(
                &c.rendered_text,
                state,
                weights,
                seed::derive(seed, stream::REWARD, i as u64),
            );
            c.reward = b.total;
            c.breakdown = Some(b);
        }
        let rewards: Vec<f64> = self.candidates.iter().map(|c| c.reward).collect();
        let (mu, sigma) = mean_std(&rewards);
        self.mu_r = mu;
        self.sigma_r = sigma;
        for (c, a) in self.candidates.iter_mut().zip(group_advantages(&rewards, adv_eps)) {
            c.advantage = a;
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// `(R_i - mean) / (std + epsilon)` with the population standard deviation.
/// Zero spread yields all-zero advantages.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Vec<f64> {
    let (mu, sigma) = mean_std(rewards);
    let denom = sigma + epsilon;
    rewards
        .iter()
        .map(|r| if denom > 0.0 { (r - mu) / denom } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoParams {
    pub clip_eps: f64,
    pub beta: f64,
    pub learning_rate: f64,
    /// Stabilizer in the advantage denominator.
    pub adv_eps: f64,
}

impl Default for GrpoParams {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            beta: 0.25,
            learning_rate: 0.05,
            adv_eps: 1e-8,
        }
    }
}

impl GrpoParams {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(GrpoError::InvalidParams("clip_eps must lie in (0, 1)".into()));
        }
        if !(self.beta >= 0.0 && self.learning_rate >= 0.0 && self.adv_eps >= 0.0) {
            return Err(GrpoError::InvalidParams(
                "beta, learning_rate and adv_eps must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub objective: f64,
    pub surrogate: f64,
    pub kl: f64,
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch is the minimum, i.e. the term depends on
/// the ratio.
fn unclipped_active(ratio: f64, advantage: f64, clip_eps: f64) -> bool {
    if advantage >= 0.0 {
        ratio <= 1.0 + clip_eps
    } else {
        ratio >= 1.0 - clip_eps
    }
}

fn ratio(policy: &ToyPolicy, reference: &ToyPolicy, c: &Candidate) -> f64 {
    (policy.sequence_log_prob(&c.decisions) - reference.sequence_log_prob(&c.decisions)).exp()
}

fn decision_count(group: &CandidateGroup) -> usize {
    group.candidates.iter().map(|c| c.decisions.len()).sum()
}

/// Clipped surrogate averaged over the group minus `beta` times the exact
/// per-decision KL averaged over every visited decision.
pub fn grpo_objective(
    group: &CandidateGroup,
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    clip_eps: f64,
    beta: f64,
) -> ObjectiveValue {
    let g = group.candidates.len() as f64;
    let surrogate = group
        .candidates
        .iter()
        .map(|c| clipped_term(ratio(policy, reference, c), c.advantage, clip_eps))
        .sum::<f64>()
        / g;
    let n = decision_count(group);
    let kl = if n == 0 {
        0.0
    } else {
        group
            .candidates
            .iter()
            .flat_map(|c| &c.decisions)
            .map(|d| decision_kl(policy, reference, d))
            .sum::<f64>()
            / n as f64
    };
    ObjectiveValue {
        objective: surrogate - beta * kl,
        surrogate,
        kl,
    }
}

/// Analytic gradient of [`grpo_objective`] with respect to `policy.theta`.
/// Advantages are constants.
pub fn grpo_gradient(
    group: &CandidateGroup,
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    clip_eps: f64,
    beta: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; policy.theta.len()];
    let g = group.candidates.len() as f64;
    for c in &group.candidates {
        let r = ratio(policy, reference, c);
        if c.advantage != 0.0 && unclipped_active(r, c.advantage, clip_eps) {
            policy.accumulate_log_prob_grad(&c.decisions, c.advantage * r / g, &mut grad);
        }
    }
    let n = decision_count(group);
    if beta > 0.0 && n > 0 {
        let scale = -beta / n as f64;
        for d in group.candidates.iter().flat_map(|c| &c.decisions) {
            accumulate_kl_grad(policy, reference, d, scale, &mut grad);
        }
    }
    grad
}

/// One gradient-ascent step on the objective.
pub fn grpo_step(
    policy: &ToyPolicy,
    group: &CandidateGroup,
    reference: &ToyPolicy,
    params: &GrpoParams,
) -> ToyPolicy {
    let grad = grpo_gradient(group, policy, reference, params.clip_eps, params.beta);
    let mut next = policy.clone();
    for (t, g) in next.theta.iter_mut().zip(grad) {
        *t += params.learning_rate * g;
    }
    next
}

/// `sum log pi(expert | state)` over the pairs.
pub fn sft_log_likelihood(policy: &ToyPolicy, pairs: &[(NetworkState, RawAction)]) -> Result<f64, GrpoError> {
    pairs
        .iter()
        .map(|(s, m)| policy.log_prob(s, m))
        .sum()
}

pub fn sft_gradient(policy: &ToyPolicy, pairs: &[(NetworkState, RawAction)]) -> Result<Vec<f64>, GrpoError> {
    let mut grad = vec![0.0; policy.theta.len()];
    for (s, m) in pairs {
        let decisions = policy.trajectory(&policy.layout(s), m)?;
        policy.accumulate_log_prob_grad(&decisions, 1.0, &mut grad);
    }
    Ok(grad)
}

/// One ascent step on the expert log-likelihood.
pub fn sft_update(
    policy: &ToyPolicy,
    pairs: &[(NetworkState, RawAction)],
    learning_rate: f64,
) -> Result<ToyPolicy, GrpoError> {
    let grad = sft_gradient(policy, pairs)?;
    let mut next = policy.clone();
    for (t, g) in next.theta.iter_mut().zip(grad) {
        *t += learning_rate * g;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub group_size: usize,
    #[serde(flatten)]
    pub params: GrpoParams,
    /// Warm-start steps on expert allocations before GRPO. The reference
    /// policy is the post-warm-start copy when this is positive and the
    /// initial policy otherwise.
    pub sft_steps: usize,
    pub sft_learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            group_size: 8,
            params: GrpoParams::default(),
            sft_steps: 0,
            sft_learning_rate: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStep {
    pub step: usize,
    pub total: f64,
    pub r_struct_mean: f64,
    pub r_perf_mean: f64,
    pub r_depth_mean: f64,
    pub objective: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub steps: Vec<TrainStep>,
    pub policy: ToyPolicy,
}

impl TrainingTrace {
    pub const CSV_HEADER: &'static str = "step,total,r_struct_mean,r_perf_mean,r_depth_mean";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{},{}",
                s.step, s.total, s.r_struct_mean, s.r_perf_mean, s.r_depth_mean
            )
            .expect("writing to a String");
        }
        out
    }

    fn mean_total(steps: &[TrainStep]) -> f64 {
        steps.iter().map(|s| s.total).sum::<f64>() / steps.len().max(1) as f64
    }

    pub fn head_mean(&self, n: usize) -> f64 {
        Self::mean_total(&self.steps[..n.min(self.steps.len())])
    }

    pub fn tail_mean(&self, n: usize) -> f64 {
        Self::mean_total(&self.steps[self.steps.len().saturating_sub(n)..])
    }
}

/// Fresh state per step, group sampling, raw-text scoring, one update.
pub fn train(
    initial: &ToyPolicy,
    env_config: &EnvConfig,
    weights: &RewardWeights,
    config: &TrainConfig,
) -> Result<TrainingTrace, GrpoError> {
    if config.steps == 0 {
        return Err(GrpoError::InvalidParams("steps must be at least 1".into()));
    }
    config.params.validate()?;
    weights.validate().map_err(GrpoError::InvalidParams)?;
    initial.validate()?;
    let env = Environment::new(env_config.clone(), config.seed)?;

    let mut policy = initial.clone();
    for s in 0..config.sft_steps {
        let state = env.state(s as u64)?;
        let expert = solve_hungarian(&state).allocation.assignment;
        policy = sft_update(&policy, &[(state, expert)], config.sft_learning_rate)?;
    }
    let reference = policy.clone();

    let mut steps = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let slot = (config.sft_steps + step) as u64;
        let state = env.state(slot)?;
        let mut group = sample_group(
            &policy,
            &state,
            config.group_size,
            seed::derive(config.seed, stream::GENERATE, slot),
        )?;
        group.set_reference(&reference);
        group.score(
            &state,
            weights,
            seed::derive(config.seed, stream::REWARD, slot),
            config.params.adv_eps,
        );
        let value = grpo_objective(&group, &policy, &reference, config.params.clip_eps, config.params.beta);
        policy = grpo_step(&policy, &group, &reference, &config.params);

        let n = group.candidates.len() as f64;
        let mean = |f: fn(&RewardBreakdown) -> f64| {
            group
                .candidates
                .iter()
                .filter_map(|c| c.breakdown.as_ref().map(f))
                .sum::<f64>()
                / n
        };
        steps.push(TrainStep {
            step,
            total: group.mu_r,
            r_struct_mean: mean(|b| b.r_struct),
            r_perf_mean: mean(|b| b.r_perf),
            r_depth_mean: mean(|b| b.r_depth),
            objective: value.objective,
            kl: value.kl,
        });
    }
    Ok(TrainingTrace { steps, policy })
}

/// Mean total reward of `policy` over `slots` states of a held-out episode,
/// `samples` rollouts per state. Rollout and baseline seeds depend only on
/// `eval_seed`, so two policies compared with one seed share random numbers.
pub fn evaluate_policy(
    policy: &ToyPolicy,
    env_config: &EnvConfig,
    weights: &RewardWeights,
    eval_seed: u64,
    slots: u64,
    samples: usize,
) -> Result<f64, GrpoError> {
    policy.validate()?;
    let env = Environment::new(env_config.clone(), eval_seed)?;
    let mut total = 0.0;
    for slot in 0..slots {
        let state = env.state(slot)?;
        let layout = policy.layout(&state);
        for i in 0..samples as u64 {
            let key = slot * samples as u64 + i;
            let mut rng = seed::rng(seed::derive(eval_seed, stream::GENERATE, key));
            let (_, map) = policy.rollout(&layout, &mut rng);
            let reward_seed = seed::derive(eval_seed, stream::REWARD, key);
            total += reward_total(&render_candidate(&map), &state, weights, reward_seed).total;
        }
    }
    Ok(total / (slots as f64 * samples as f64).max(1.0))
}
