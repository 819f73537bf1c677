use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{SolveContext, SolveResult, Solver, SolverError};
use crate::allocation::{Allocation, RawAction};
use crate::netenv::{ChannelId, NetworkState, UserId};

pub(super) const NAME: &str = "exhaustive";

/// Hard ceiling on enumerated maps regardless of `max_size`.
const MAX_MAPS: u128 = 200_000_000;

fn count_injections(from: usize, into: usize) -> u128 {
    (0..from).map(|i| (into - i) as u128).product()
}

struct Search<'a> {
    /// `rates[i][j]`: rate of the i-th element of the smaller side paired
    /// with the j-th element of the larger side.
    rates: &'a [Vec<f64>],
    used: Vec<bool>,
    path: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    leaves: usize,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, acc: f64) {
        if depth == self.rates.len() {
            self.leaves += 1;
            // Strict comparison keeps the first map in lexicographic order.
            if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                self.best = Some((acc, self.path.clone()));
            }
            return;
        }
        for j in 0..self.used.len() {
            if self.used[j] {
                continue;
            }
            self.used[j] = true;
            self.path.push(j);
            self.descend(depth + 1, acc + self.rates[depth][j]);
            self.path.pop();
            self.used[j] = false;
        }
    }
}

/// Exact sum-rate optimum over every injective map between requesters and
/// idle channels. `max_size` bounds the number of pairs in a complete map.
pub fn solve_exhaustive(state: &NetworkState, max_size: usize) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let users: Vec<UserId> = state.active_ids().to_vec();
    let channels: Vec<ChannelId> = state.idle_channels();
    let pairs = users.len().min(channels.len());
    let (small, large) = if users.len() <= channels.len() {
        (users.len(), channels.len())
    } else {
        (channels.len(), users.len())
    };
    if pairs > max_size || count_injections(small, large) > MAX_MAPS {
        return Err(SolverError::SizeExceeded { pairs, max_size });
    }

    let users_first = users.len() <= channels.len();
    let rates: Vec<Vec<f64>> = if users_first {
        users
            .iter()
            .map(|&u| channels.iter().map(|&c| state.pair_rate(u, c).unwrap_or(0.0)).collect())
            .collect()
    } else {
        channels
            .iter()
            .map(|&c| users.iter().map(|&u| state.pair_rate(u, c).unwrap_or(0.0)).collect())
            .collect()
    };

    let mut search = Search {
        rates: &rates,
        used: vec![false; large],
        path: Vec::with_capacity(small),
        best: None,
        leaves: 0,
    };
    search.descend(0, 0.0);

    let picks = search.best.map(|(_, p)| p).unwrap_or_default();
    let assignment: RawAction = picks
        .into_iter()
        .enumerate()
        .map(|(i, j)| {
            if users_first {
                (users[i], channels[j])
            } else {
                (users[j], channels[i])
            }
        })
        .collect();
    Ok(SolveResult::new(
        NAME,
        Allocation::new(state.slot(), assignment),
        state,
        start.elapsed(),
        search.leaves,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exhaustive {
    pub max_size: usize,
}

impl Default for Exhaustive {
    fn default() -> Self {
        Self { max_size: 5 }
    }
}

impl Solver for Exhaustive {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, state: &NetworkState, _ctx: &SolveContext) -> Result<SolveResult, SolverError> {
        solve_exhaustive(state, self.max_size)
    }
}
