//! Tabular softmax policy over (distance bucket, channel rank).
//!
//! Requesters are visited in id order. Each draws one of the idle channels
//! still free, ranked by descending bandwidth, with logits
//! `theta[bucket][min(rank, max_ranks - 1)] / temperature`. Once the idle
//! channels run out the remaining requesters stay unassigned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GrpoError;
use crate::allocation::RawAction;
use crate::netenv::{normalized_distance, ChannelId, NetworkState, UserId};
use crate::seed;

/// Below this temperature sampling is the greedy argmax rollout.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub bins: usize,
    pub max_ranks: usize,
    pub temperature: f64,
    /// Row-major `bins x max_ranks`.
    pub theta: Vec<f64>,
}

/// One sequential draw: who decided, what was on offer, what was taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub bucket: usize,
    /// Channel ranks still free, ascending.
    pub available: Vec<usize>,
    /// Index into `available`.
    pub chosen: usize,
}

/// Per-state view: requesters with their buckets, idle channels by rank.
#[derive(Debug, Clone)]
pub struct Layout {
    pub users: Vec<(UserId, usize)>,
    pub ranked_channels: Vec<ChannelId>,
}

impl ToyPolicy {
    pub fn uniform(bins: usize, max_ranks: usize, temperature: f64) -> Self {
        Self {
            bins,
            max_ranks,
            temperature,
            theta: vec![0.0; bins * max_ranks],
        }
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let ok = self.bins > 0
            && self.max_ranks > 0
            && self.temperature > 0.0
            && self.theta.len() == self.bins * self.max_ranks
            && self.theta.iter().all(|t| t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(GrpoError::InvalidPolicy)
        }
    }

    pub fn param_index(&self, bucket: usize, rank: usize) -> usize {
        bucket * self.max_ranks + rank.min(self.max_ranks - 1)
    }

    pub fn bucket(&self, state: &NetworkState, user: UserId) -> usize {
        let d = state
            .user(user)
            .and_then(|u| normalized_distance(u, state.link()).ok())
            .unwrap_or(1.0);
        ((d * self.bins as f64).floor() as usize).min(self.bins - 1)
    }

    pub fn layout(&self, state: &NetworkState) -> Layout {
        let mut channels: Vec<(f64, ChannelId)> = state
            .channels()
            .iter()
            .filter(|c| !c.occupied)
            .map(|c| (c.bandwidth_hz, c.id))
            .collect();
        channels.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Layout {
            users: state
                .active_ids()
                .iter()
                .map(|&u| (u, self.bucket(state, u)))
                .collect(),
            ranked_channels: channels.into_iter().map(|(_, c)| c).collect(),
        }
    }

    /// Logits over `d.available`.
    pub fn logits(&self, d: &Decision) -> Vec<f64> {
        d.available
            .iter()
            .map(|&r| self.theta[self.param_index(d.bucket, r)] / self.temperature)
            .collect()
    }

    pub fn probabilities(&self, d: &Decision) -> Vec<f64> {
        softmax(&self.logits(d))
    }

    pub fn decision_log_prob(&self, d: &Decision) -> f64 {
        let z = self.logits(d);
        z[d.chosen] - log_sum_exp(&z)
    }

    pub fn sequence_log_prob(&self, decisions: &[Decision]) -> f64 {
        decisions.iter().map(|d| self.decision_log_prob(d)).sum()
    }

    /// Adds `scale * d/dtheta log pi(d)` for every decision into `grad`.
    pub fn accumulate_log_prob_grad(&self, decisions: &[Decision], scale: f64, grad: &mut [f64]) {
        let inv_t = scale / self.temperature;
        for d in decisions {
            let p = self.probabilities(d);
            for (k, &r) in d.available.iter().enumerate() {
                let indicator = if k == d.chosen { 1.0 } else { 0.0 };
                grad[self.param_index(d.bucket, r)] += inv_t * (indicator - p[k]);
            }
        }
    }

    /// Samples one rollout. Returns the decisions and the resulting map.
    pub fn rollout(&self, layout: &Layout, rng: &mut impl Rng) -> (Vec<Decision>, RawAction) {
        let mut free: Vec<usize> = (0..layout.ranked_channels.len()).collect();
        let mut decisions = Vec::new();
        let mut map = RawAction::new();
        for &(user, bucket) in &layout.users {
            if free.is_empty() {
                break;
            }
            let mut d = Decision {
                bucket,
                available: free.clone(),
                chosen: 0,
            };
            d.chosen = if self.temperature < GREEDY_TEMPERATURE {
                argmax(&self.logits(&d))
            } else {
                sample_index(&self.probabilities(&d), rng)
            };
            let rank = free.remove(d.chosen);
            map.insert(user, layout.ranked_channels[rank]);
            decisions.push(d);
        }
        (decisions, map)
    }

    /// Rebuilds the decision sequence that produces `map`, if the sampler can
    /// reach it.
    pub fn trajectory(&self, layout: &Layout, map: &RawAction) -> Result<Vec<Decision>, GrpoError> {
        let served = layout.users.len().min(layout.ranked_channels.len());
        if map.len() != served {
            return Err(GrpoError::UnreachableCandidate(format!(
                "expected {served} assignments, found {}",
                map.len()
            )));
        }
        let mut free: Vec<usize> = (0..layout.ranked_channels.len()).collect();
        let mut decisions = Vec::with_capacity(served);
        for &(user, bucket) in layout.users.iter().take(served) {
            let channel = map.get(&user).ok_or_else(|| {
                GrpoError::UnreachableCandidate(format!("user {user} is not assigned"))
            })?;
            let chosen = free
                .iter()
                .position(|&r| layout.ranked_channels[r] == *channel)
                .ok_or_else(|| {
                    GrpoError::UnreachableCandidate(format!("channel {channel} is not free and idle"))
                })?;
            decisions.push(Decision {
                bucket,
                available: free.clone(),
                chosen,
            });
            free.remove(chosen);
        }
        Ok(decisions)
    }

    /// Exact log-probability of `map` under the sequential sampler.
    pub fn log_prob(&self, state: &NetworkState, map: &RawAction) -> Result<f64, GrpoError> {
        let layout = self.layout(state);
        Ok(self.sequence_log_prob(&self.trajectory(&layout, map)?))
    }

    /// One rollout from a fresh RNG seeded with `seed`.
    pub fn sample(&self, state: &NetworkState, seed: u64) -> (Vec<Decision>, RawAction) {
        let layout = self.layout(state);
        self.rollout(&layout, &mut seed::rng(seed))
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|x| (x - lse).exp()).collect()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

fn sample_index(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// `KL(p || q)` for one decision, where `p` and `q` are the two policies'
/// distributions over the same available set.
pub fn decision_kl(policy: &ToyPolicy, reference: &ToyPolicy, d: &Decision) -> f64 {
    let zp = policy.logits(d);
    let zq = reference.logits(d);
    let (lp, lq) = (log_sum_exp(&zp), log_sum_exp(&zq));
    zp.iter()
        .zip(&zq)
        .map(|(a, b)| {
            let log_p = a - lp;
            log_p.exp() * (log_p - (b - lq))
        })
        .sum::<f64>()
        .max(0.0)
}

/// Adds `scale * d/dtheta KL(policy || reference)` for one decision.
pub fn accumulate_kl_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    d: &Decision,
    scale: f64,
    grad: &mut [f64],
) {
    let zp = policy.logits(d);
    let zq = reference.logits(d);
    let (lp, lq) = (log_sum_exp(&zp), log_sum_exp(&zq));
    let log_ratio: Vec<f64> = zp.iter().zip(&zq).map(|(a, b)| (a - lp) - (b - lq)).collect();
    let p: Vec<f64> = zp.iter().map(|a| (a - lp).exp()).collect();
    let kl: f64 = p.iter().zip(&log_ratio).map(|(pi, lr)| pi * lr).sum();
    let inv_t = scale / policy.temperature;
    for (k, &r) in d.available.iter().enumerate() {
        grad[policy.param_index(d.bucket, r)] += inv_t * p[k] * (log_ratio[k] - kl);
    }
}
