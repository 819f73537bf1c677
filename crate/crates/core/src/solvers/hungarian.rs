//! Kuhn-Munkres maximum-weight bipartite matching.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{SolveContext, SolveResult, Solver, SolverError};
use crate::allocation::{Allocation, RawAction};
use crate::netenv::{ChannelId, NetworkState, UserId};

pub(super) const NAME: &str = "hungarian";

/// Shortest-augmenting-path Hungarian method on an `n x m` cost matrix with
/// `n <= m`. Returns the column assigned to each row.
fn min_cost_rows_le_cols(cost: &[Vec<f64>], m: usize) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Maximum-weight matching on a rectangular non-negative weight matrix.
///
/// Returns, for each row, the matched column. When there are more rows than
/// columns the surplus rows are matched to zero-weight dummy columns, which
/// shows up as `None`. Solving the transposed problem is equivalent to that
/// padding and keeps the cost at `O(min^2 * max)`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        let cost: Vec<Vec<f64>> = weights
            .iter()
            .map(|r| r.iter().map(|w| -w).collect())
            .collect();
        min_cost_rows_le_cols(&cost, cols)
            .into_iter()
            .map(Some)
            .collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..cols)
            .map(|c| weights.iter().map(|r| -r[c]).collect())
            .collect();
        let col_to_row = min_cost_rows_le_cols(&cost, rows);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

/// Optimal sum-rate assignment of `users` to `channels` (both subsets of the
/// state's active users and idle channels).
pub(super) fn match_block(
    state: &NetworkState,
    users: &[UserId],
    channels: &[ChannelId],
) -> RawAction {
    let weights: Vec<Vec<f64>> = users
        .iter()
        .map(|&u| {
            channels
                .iter()
                .map(|&c| state.pair_rate(u, c).unwrap_or(0.0))
                .collect()
        })
        .collect();
    max_weight_assignment(&weights)
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (users[r], channels[c])))
        .collect()
}

pub fn solve_hungarian(state: &NetworkState) -> SolveResult {
    let start = Instant::now();
    let assignment = match_block(state, state.active_ids(), &state.idle_channels());
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
pub struct Hungarian {}

impl Solver for Hungarian {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, state: &NetworkState, _ctx: &SolveContext) -> Result<SolveResult, SolverError> {
        Ok(solve_hungarian(state))
    }
}
