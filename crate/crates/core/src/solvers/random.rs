use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{SolveContext, SolveResult, Solver, SolverError};
use crate::allocation::{Allocation, RawAction};
use crate::netenv::NetworkState;
use crate::seed;

pub(super) const NAME: &str = "random";

/// Uniformly random injective map from requesters into idle channels. When
/// channels are scarce a uniformly random subset of requesters is served.
pub fn solve_random(seed: u64, state: &NetworkState) -> SolveResult {
    let start = Instant::now();
    let mut rng = seed::rng(seed);
    let mut users = state.active_ids().to_vec();
    let mut channels = state.idle_channels();
    let k = users.len().min(channels.len());
    if users.len() > channels.len() {
        users.partial_shuffle(&mut rng, k);
    }
    let (picked, _) = channels.partial_shuffle(&mut rng, k);
    let assignment: RawAction = users[..k].iter().copied().zip(picked.iter().copied()).collect();
    SolveResult::new(
        NAME,
        Allocation::new(state.slot(), assignment),
        state,
        start.elapsed(),
        1,
    )
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomAssignment {}

impl Solver for RandomAssignment {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, state: &NetworkState, ctx: &SolveContext) -> Result<SolveResult, SolverError> {
        Ok(solve_random(ctx.seed, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netenv::{ChannelId, ChannelSpec, LinkParams, UserId, UserNode};

    fn state(users: u32, channels: u32) -> NetworkState {
        let u = (0..users).map(|i| UserNode::new(i, 10.0 + i as f64, 0.0)).collect();
        let c = (0..channels).map(|i| ChannelSpec::new(i, 5e6, false)).collect();
        let active = (0..users).map(UserId).collect();
        NetworkState::new(0, u, c, active, LinkParams::default(), 0).unwrap()
    }

    #[test]
    fn forced_and_empty() {
        let r = solve_random(3, &state(1, 1));
        assert_eq!(r.allocation.assignment.get(&UserId(0)), Some(&ChannelId(0)));
        let r = solve_random(3, &state(0, 2));
        assert!(r.allocation.is_empty());
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn scarce_channels_flag_partial() {
        let r = solve_random(1, &state(4, 2));
        assert_eq!(r.allocation.len(), 2);
        assert!(r.partial);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = state(5, 7);
        assert_eq!(solve_random(9, &s).allocation, solve_random(9, &s).allocation);
    }
}
