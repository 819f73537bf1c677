//! Execution-aware reward on raw generated text.
//!
//! Three terms: structural compliance, throughput relative to a seeded random
//! baseline, and a penalty for short outputs. Everything is computed on the
//! candidate as generated; the repair pipeline is never consulted here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::allocation::{lenient_throughput, RawAction};
use crate::netenv::{ChannelId, NetworkState};
use crate::serializer::{estimate_tokens, parse_action, ParseError};
use crate::solvers::solve_random;

/// Power limit for secondary transmissions landing on a primary channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceThreshold {
    /// Multiple of the noise power `N0 * B_c` of the violated channel.
    NoiseMultiple(f64),
    Watts(f64),
}

impl InterferenceThreshold {
    pub fn watts(&self, state: &NetworkState, channel: ChannelId) -> f64 {
        match *self {
            Self::Watts(w) => w,
            Self::NoiseMultiple(m) => state
                .channel(channel)
                .map_or(0.0, |c| m * state.link().noise_power(c.bandwidth_hz)),
        }
    }
}

impl Default for InterferenceThreshold {
    fn default() -> Self {
        Self::NoiseMultiple(10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub omega: f64,
    pub kappa: f64,
    pub l_thr: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub interference_threshold: InterferenceThreshold,
    /// Sub-score for a parsable action block.
    pub struct_parse: f64,
    /// Sub-score for keys that are requesting users and values that are
    /// existing channels.
    pub struct_alignment: f64,
    /// Sub-score for using idle channels only.
    pub struct_context: f64,
    pub struct_cap: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            omega: 5.0,
            kappa: 5.0,
            l_thr: 512.0,
            clamp_lo: -10.0,
            clamp_hi: 10.0,
            interference_threshold: InterferenceThreshold::default(),
            struct_parse: 0.4,
            struct_alignment: 0.4,
            struct_context: 0.4,
            struct_cap: 1.2,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l_thr > 0.0) {
            return Err("l_thr must be positive".into());
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return Err("clamp_lo must be below clamp_hi".into());
        }
        if !(self.omega > 0.0 && self.kappa > 0.0) {
            return Err("omega and kappa must be positive".into());
        }
        Ok(())
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.clamp_lo, self.clamp_hi)
    }
}

/// Interference multiplier on the performance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    /// A channel is assigned twice.
    Duplicate,
    /// Secondary power on a primary channel exceeds the threshold.
    Interference,
    Clean,
}

impl Psi {
    pub fn factor(self) -> f64 {
        match self {
            Self::Duplicate => 0.0,
            Self::Interference => 0.3,
            Self::Clean => 1.0,
        }
    }
}

pub fn psi_penalty(raw: &RawAction, state: &NetworkState, threshold: InterferenceThreshold) -> Psi {
    let mut per_channel: BTreeMap<ChannelId, (usize, f64)> = BTreeMap::new();
    for (&u, &c) in raw {
        let e = per_channel.entry(c).or_default();
        e.0 += 1;
        e.1 += state.user_power(u).unwrap_or(0.0);
    }
    if per_channel.values().any(|&(n, _)| n > 1) {
        return Psi::Duplicate;
    }
    let interferes = per_channel.iter().any(|(&c, &(_, power))| {
        state.channel(c).is_some_and(|ch| ch.occupied) && power > threshold.watts(state, c)
    });
    if interferes {
        Psi::Interference
    } else {
        Psi::Clean
    }
}

/// Additive structural score. Alignment and context credit need at least one
/// assignment, so an empty dictionary earns only the parse credit.
pub fn reward_struct(
    parsed: &Result<RawAction, ParseError>,
    state: &NetworkState,
    weights: &RewardWeights,
) -> f64 {
    let Ok(raw) = parsed else {
        return 0.0;
    };
    let mut score = weights.struct_parse;
    if !raw.is_empty() {
        if raw
            .iter()
            .all(|(&u, &c)| state.is_active(u) && state.channel(c).is_some())
        {
            score += weights.struct_alignment;
        }
        if raw.values().all(|&c| state.is_idle(c)) {
            score += weights.struct_context;
        }
    }
    score.min(weights.struct_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfOutcome {
    pub value: f64,
    pub psi: Psi,
    /// The random baseline had zero throughput; `value` is then 0.
    pub degenerate: bool,
}

/// `omega * (T(raw) / T(random) - 1) * psi`, clamped. `T(raw)` counts only
/// pairs of requesting users on idle channels.
pub fn reward_perf(raw: &RawAction, state: &NetworkState, weights: &RewardWeights, seed: u64) -> PerfOutcome {
    let psi = psi_penalty(raw, state, weights.interference_threshold);
    if raw.is_empty() {
        return PerfOutcome {
            value: 0.0,
            psi,
            degenerate: false,
        };
    }
    let baseline = solve_random(seed, state).objective;
    if baseline <= 0.0 {
        return PerfOutcome {
            value: 0.0,
            psi,
            degenerate: true,
        };
    }
    let ratio = lenient_throughput(raw, state) / baseline;
    PerfOutcome {
        value: weights.clamp(weights.omega * (ratio - 1.0) * psi.factor()),
        psi,
        degenerate: false,
    }
}

/// `-max(0, (l_thr - L) / l_thr * kappa)`.
pub fn reward_depth(output_tokens: usize, weights: &RewardWeights) -> f64 {
    let shortfall = (weights.l_thr - output_tokens as f64) / weights.l_thr * weights.kappa;
    weights.clamp(-shortfall.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_struct: f64,
    pub r_perf: f64,
    pub r_depth: f64,
    pub total: f64,
    /// `None` when the text did not parse.
    pub psi: Option<Psi>,
    pub degenerate: bool,
}

pub fn reward_total(text: &str, state: &NetworkState, weights: &RewardWeights, seed: u64) -> RewardBreakdown {
    let parsed = parse_action(text);
    let r_struct = weights.clamp(reward_struct(&parsed, state, weights));
    let perf = parsed.as_ref().ok().map(|raw| reward_perf(raw, state, weights, seed));
    let r_perf = perf.map_or(0.0, |p| p.value);
    let r_depth = reward_depth(estimate_tokens(text), weights);
    let total =
        weights.clamp(weights.lambda1 * r_struct + weights.lambda2 * r_perf + weights.lambda3 * r_depth);
    RewardBreakdown {
        r_struct,
        r_perf,
        r_depth,
        total,
        psi: perf.map(|p| p.psi),
        degenerate: perf.is_some_and(|p| p.degenerate),
    }
}
