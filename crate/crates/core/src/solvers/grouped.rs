//! Partitioned Kuhn-Munkres for large cells.
//!
//! Requesters are split into random blocks of at most `group_size` users and
//! the idle channels into as many disjoint slices. Each block is matched
//! optimally against its slice and the results are stitched together. While
//! the wall-clock budget lasts the cell is re-partitioned with fresh
//! randomness and the best stitched allocation is kept. The first pass always
//! completes; later passes are abandoned between block solves once the
//! deadline passes.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hungarian::match_block;
use super::{SolveContext, SolveResult, Solver, SolverError};
use crate::allocation::{lenient_throughput, Allocation, RawAction};
use crate::netenv::{ChannelId, NetworkState, UserId};
use crate::seed;

pub(super) const NAME: &str = "grouped_hungarian";

fn partition_pass(
    state: &NetworkState,
    users: &mut [UserId],
    channels: &mut [ChannelId],
    group_size: usize,
    rng: &mut impl rand::Rng,
    deadline: Option<Instant>,
) -> Option<RawAction> {
    users.shuffle(rng);
    channels.shuffle(rng);
    let blocks = users.len().div_ceil(group_size).max(1);
    let mut assignment = RawAction::new();
    for b in 0..blocks {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return None;
        }
        let u_lo = b * users.len() / blocks;
        let u_hi = (b + 1) * users.len() / blocks;
        let c_lo = b * channels.len() / blocks;
        let c_hi = (b + 1) * channels.len() / blocks;
        let mut block_users = users[u_lo..u_hi].to_vec();
        let mut block_channels = channels[c_lo..c_hi].to_vec();
        block_users.sort();
        block_channels.sort();
        assignment.extend(match_block(state, &block_users, &block_channels));
    }
    Some(assignment)
}

/// `max_passes` caps the number of partitions tried (`None`: budget only).
pub fn solve_grouped_hungarian(
    state: &NetworkState,
    budget: Duration,
    group_size: usize,
    seed: u64,
    max_passes: Option<usize>,
) -> SolveResult {
    let start = Instant::now();
    let deadline = start + budget;
    let group_size = group_size.max(1);
    let mut rng = seed::rng(seed);
    let mut users = state.active_ids().to_vec();
    let mut channels = state.idle_channels();
    let single_block = users.len() <= group_size;

    let mut best = partition_pass(state, &mut users, &mut channels, group_size, &mut rng, None)
        .expect("first pass runs without a deadline");
    let mut best_value = lenient_throughput(&best, state);
    let mut passes = 1;

    while !single_block
        && max_passes.is_none_or(|m| passes < m)
        && Instant::now() < deadline
    {
        let Some(candidate) =
            partition_pass(state, &mut users, &mut channels, group_size, &mut rng, Some(deadline))
        else {
            break;
        };
        passes += 1;
        let value = lenient_throughput(&candidate, state);
        if value > best_value {
            best = candidate;
            best_value = value;
        }
    }

    SolveResult::new(
        NAME,
        Allocation::new(state.slot(), best),
        state,
        start.elapsed(),
        passes,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupedHungarian {
    pub group_size: usize,
    pub budget_s: f64,
    pub max_passes: Option<usize>,
}

impl Default for GroupedHungarian {
    fn default() -> Self {
        Self {
            group_size: 50,
            budget_s: 1.0,
            max_passes: None,
        }
    }
}

impl Solver for GroupedHungarian {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, state: &NetworkState, ctx: &SolveContext) -> Result<SolveResult, SolverError> {
        if !(self.budget_s > 0.0) || self.group_size == 0 {
            return Err(SolverError::InvalidParams {
                solver: NAME.into(),
                message: "budget_s and group_size must be positive".into(),
            });
        }
        let budget = ctx
            .budget
            .unwrap_or_else(|| Duration::from_secs_f64(self.budget_s));
        Ok(solve_grouped_hungarian(
            state,
            budget,
            self.group_size,
            ctx.seed,
            self.max_passes,
        ))
    }

    fn is_time_budgeted(&self) -> bool {
        self.max_passes.is_none_or(|m| m > 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::is_feasible;
    use crate::netenv::{EnvConfig, Environment, LinkParams};
    use crate::solvers::solve_hungarian;

    fn state(u: usize, c: usize, k: usize, seed: u64) -> NetworkState {
        let cfg = EnvConfig::shape(u, c, k).with_link(LinkParams::calibrated());
        Environment::new(cfg, seed).unwrap().state(0).unwrap()
    }

    #[test]
    fn single_block_equals_hungarian() {
        let s = state(30, 40, 12, 2);
        let g = solve_grouped_hungarian(&s, Duration::from_millis(50), 12, 7, None);
        assert_eq!(g.allocation, solve_hungarian(&s).allocation);
        assert_eq!(g.iterations, 1);
    }

    #[test]
    fn tiny_budget_still_returns_first_pass() {
        let s = state(200, 220, 120, 3);
        let g = solve_grouped_hungarian(&s, Duration::from_nanos(1), 20, 1, None);
        assert_eq!(g.iterations, 1);
        assert!(is_feasible(&g.allocation, &s).is_feasible());
        assert_eq!(g.allocation.len(), 120);
    }

    #[test]
    fn more_passes_never_hurt() {
        let s = state(200, 200, 200, 4);
        let one = solve_grouped_hungarian(&s, Duration::from_secs(5), 50, 9, Some(1));
        let many = solve_grouped_hungarian(&s, Duration::from_secs(5), 50, 9, Some(12));
        assert_eq!(many.iterations, 12);
        assert!(many.objective >= one.objective);
    }
}
