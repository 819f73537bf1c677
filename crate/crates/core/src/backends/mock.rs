//! Scripted generator with a seeded mix of well-formed and broken outputs.

use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{BackendError, CandidateBackend, GenerationRequest, GenerationResponse};
use crate::allocation::RawAction;
use crate::grpo::MIN_OUTPUT_TOKENS;
use crate::netenv::{ChannelId, NetworkState, UserId};
use crate::seed::{self, stream};
use crate::serializer::{render_action, render_code_block};
use crate::solvers::solve_random;

pub(super) const NAME: &str = "mock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Feasible dictionary in a padded code block.
    Valid,
    /// Two keys share a channel.
    DuplicateChannel,
    /// One user sits on a primary channel.
    OccupiedChannel,
    /// Text without a dictionary.
    Prose,
    /// Feasible dictionary with no padding.
    Short,
}

impl MockMode {
    pub const ALL: [MockMode; 5] = [
        Self::Valid,
        Self::DuplicateChannel,
        Self::OccupiedChannel,
        Self::Prose,
        Self::Short,
    ];
}

/// Relative weights of the modes; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockProportions {
    pub valid: f64,
    pub duplicate_channel: f64,
    pub occupied_channel: f64,
    pub prose: f64,
    pub short: f64,
}

impl Default for MockProportions {
    fn default() -> Self {
        Self {
            valid: 1.0,
            duplicate_channel: 0.0,
            occupied_channel: 0.0,
            prose: 0.0,
            short: 0.0,
        }
    }
}

impl MockProportions {
    pub fn only(mode: MockMode) -> Self {
        let mut p = Self {
            valid: 0.0,
            ..Self::default()
        };
        *p.weight_mut(mode) = 1.0;
        p
    }

    fn weight_mut(&mut self, mode: MockMode) -> &mut f64 {
        match mode {
            MockMode::Valid => &mut self.valid,
            MockMode::DuplicateChannel => &mut self.duplicate_channel,
            MockMode::OccupiedChannel => &mut self.occupied_channel,
            MockMode::Prose => &mut self.prose,
            MockMode::Short => &mut self.short,
        }
    }

    pub fn weights(&self) -> [f64; 5] {
        [self.valid, self.duplicate_channel, self.occupied_channel, self.prose, self.short]
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    proportions: MockProportions,
    sampler: WeightedIndex<f64>,
}

impl MockBackend {
    pub fn new(proportions: MockProportions) -> Result<Self, BackendError> {
        let sampler = WeightedIndex::new(proportions.weights()).map_err(|e| BackendError::InvalidParams {
            backend: NAME.into(),
            message: format!("mode weights: {e}"),
        })?;
        Ok(Self {
            proportions,
            sampler,
        })
    }

    pub fn proportions(&self) -> &MockProportions {
        &self.proportions
    }

    /// Mode of candidate `index` for a request seeded with `seed`.
    pub fn mode_for(&self, seed: u64, index: usize) -> MockMode {
        let mut rng = seed::rng(seed::derive(seed, stream::GENERATE, index as u64));
        MockMode::ALL[self.sampler.sample(&mut rng)]
    }

    pub fn render(&self, state: &NetworkState, mode: MockMode, seed: u64, max_tokens: usize) -> String {
        let base = solve_random(seed, state).allocation.assignment;
        let pad = MIN_OUTPUT_TOKENS.min(max_tokens);
        match mode {
            MockMode::Valid => render_code_block(&base, pad),
            MockMode::Short => render_action(&base),
            MockMode::DuplicateChannel => render_code_block(&with_duplicate(state, base), pad),
            MockMode::OccupiedChannel => render_code_block(&with_occupied(state, base), pad),
            MockMode::Prose => prose(pad),
        }
    }
}

/// Adds a clash on the first assigned channel. With fewer than two
/// requesters the clash comes from an id that is not requesting.
fn with_duplicate(state: &NetworkState, mut map: RawAction) -> RawAction {
    let channel = map
        .values()
        .next()
        .copied()
        .or_else(|| state.channels().first().map(|c| c.id))
        .unwrap_or(ChannelId(0));
    let other = state
        .active_ids()
        .iter()
        .copied()
        .find(|u| map.get(u) != Some(&channel))
        .unwrap_or_else(|| UserId(state.users().last().map_or(0, |u| u.id.0 + 1)));
    map.insert(other, channel);
    if map.values().filter(|&&c| c == channel).count() < 2 {
        let phantom = UserId(state.users().last().map_or(0, |u| u.id.0 + 1));
        map.insert(phantom, channel);
    }
    map
}

/// Moves the first requester onto a primary channel, or onto a channel id
/// that does not exist when nothing is occupied.
fn with_occupied(state: &NetworkState, mut map: RawAction) -> RawAction {
    let target = state
        .channels()
        .iter()
        .find(|c| c.occupied)
        .map(|c| c.id)
        .unwrap_or_else(|| ChannelId(state.channels().last().map_or(0, |c| c.id.0 + 1)));
    let user = map
        .keys()
        .next()
        .copied()
        .or_else(|| state.active_ids().first().copied())
        .unwrap_or(UserId(0));
    map.insert(user, target);
    map
}

fn prose(min_tokens: usize) -> String {
    const LINE: &str = "Sort requesters by received power and pair them with the widest idle channels.\n";
    let mut out = String::new();
    while out.len() < min_tokens * 4 {
        out.push_str(LINE);
    }
    out
}

impl CandidateBackend for MockBackend {
    fn name(&self) -> &str {
        NAME
    }

    fn generate(
        &self,
        state: &NetworkState,
        request: &GenerationRequest,
    ) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        let start = Instant::now();
        let texts = (0..request.num_candidates)
            .map(|i| {
                let mode = self.mode_for(request.seed, i);
                let text_seed = seed::derive(request.seed, stream::SOLVER, i as u64);
                self.render(state, mode, text_seed, request.max_tokens)
            })
            .collect();
        Ok(GenerationResponse {
            texts,
            latency: start.elapsed(),
            backend_name: NAME.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::check_pairs;
    use crate::netenv::{EnvConfig, Environment};
    use crate::reward::{reward_struct, RewardWeights};
    use crate::serializer::{parse_action, ParseError};

    fn state() -> NetworkState {
        let mut cfg = EnvConfig::shape(12, 12, 5);
        cfg.occupied_fraction = 0.25;
        Environment::new(cfg, 3).unwrap().state(0).unwrap()
    }

    fn request(n: usize, seed: u64) -> GenerationRequest {
        GenerationRequest {
            prompt: String::new(),
            max_tokens: 1024,
            num_candidates: n,
            temperature: 1.0,
            seed,
        }
    }

    fn feasible(text: &str, s: &NetworkState) -> bool {
        parse_action(text).is_ok_and(|m| {
            let pairs: Vec<_> = m.into_iter().collect();
            check_pairs(&pairs, s).is_feasible()
        })
    }

    #[test]
    fn each_mode_has_its_failure() {
        let s = state();
        let w = RewardWeights::default();
        for mode in MockMode::ALL {
            let b = MockBackend::new(MockProportions::only(mode)).unwrap();
            for text in b.generate(&s, &request(20, 9)).unwrap().texts {
                let parsed = parse_action(&text);
                let r = reward_struct(&parsed, &s, &w);
                match mode {
                    MockMode::Valid | MockMode::Short => {
                        assert!(feasible(&text, &s));
                        assert!((r - 1.2).abs() < 1e-12);
                    }
                    MockMode::Prose => {
                        assert_eq!(parsed, Err(ParseError::NoActionFound));
                        assert_eq!(r, 0.0);
                    }
                    MockMode::DuplicateChannel | MockMode::OccupiedChannel => {
                        assert!(parsed.is_ok() && !feasible(&text, &s), "{mode:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = state();
        let p = MockProportions {
            valid: 0.5,
            prose: 0.5,
            ..MockProportions::default()
        };
        let b = MockBackend::new(p).unwrap();
        assert_eq!(
            b.generate(&s, &request(30, 4)).unwrap().texts,
            b.generate(&s, &request(30, 4)).unwrap().texts
        );
    }

    #[test]
    fn rejects_zero_weights() {
        let p = MockProportions {
            valid: 0.0,
            ..MockProportions::default()
        };
        assert!(MockBackend::new(p).is_err());
    }
}
