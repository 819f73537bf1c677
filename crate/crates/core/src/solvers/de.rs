//! Differential evolution over random-key genomes.
//!
//! A genome holds one key in `[0, 1]` per requester. Decoding ranks the
//! requesters by key (highest first) and hands them the idle channels in
//! order of decreasing best rate, so every genome decodes to a feasible
//! allocation without consulting the repair pipeline.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SolveContext, SolveResult, Solver, SolverError};
use crate::allocation::{Allocation, RawAction};
use crate::netenv::{ChannelId, NetworkState, UserId};
use crate::seed;

pub(super) const NAME: &str = "de";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeParams {
    pub pop_size: usize,
    pub crossover_rate: f64,
    /// Differential weight `F`.
    pub differential_weight: f64,
    pub generations: usize,
    pub budget_s: Option<f64>,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            pop_size: 50,
            crossover_rate: 0.9,
            differential_weight: 0.5,
            generations: 200,
            budget_s: None,
        }
    }
}

struct Decoder {
    users: Vec<UserId>,
    channels: Vec<ChannelId>,
    /// `rates[u][r]`: rate of user `u` on the channel of rank `r`.
    rates: Vec<Vec<f64>>,
}

impl Decoder {
    fn new(state: &NetworkState) -> Self {
        let users = state.active_ids().to_vec();
        let mut ranked: Vec<(f64, ChannelId)> = state
            .idle_channels()
            .into_iter()
            .map(|c| {
                let best = users
                    .iter()
                    .filter_map(|&u| state.pair_rate(u, c))
                    .fold(0.0, f64::max);
                (best, c)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(users.len());
        let channels: Vec<ChannelId> = ranked.into_iter().map(|(_, c)| c).collect();
        let rates = users
            .iter()
            .map(|&u| {
                channels
                    .iter()
                    .map(|&c| state.pair_rate(u, c).unwrap_or(0.0))
                    .collect()
            })
            .collect();
        Self {
            users,
            channels,
            rates,
        }
    }

    /// Rank slot of every user; `None` for users left without a channel.
    fn ranks(&self, genome: &[f64]) -> Vec<Option<usize>> {
        let mut order: Vec<usize> = (0..genome.len()).collect();
        order.sort_by(|&a, &b| genome[b].total_cmp(&genome[a]).then(a.cmp(&b)));
        let mut ranks = vec![None; genome.len()];
        for (rank, &u) in order.iter().enumerate().take(self.channels.len()) {
            ranks[u] = Some(rank);
        }
        ranks
    }

    fn fitness(&self, genome: &[f64]) -> f64 {
        self.ranks(genome)
            .iter()
            .enumerate()
            .filter_map(|(u, r)| r.map(|r| self.rates[u][r]))
            .sum()
    }

    fn decode(&self, genome: &[f64]) -> RawAction {
        self.ranks(genome)
            .iter()
            .enumerate()
            .filter_map(|(u, r)| r.map(|r| (self.users[u], self.channels[r])))
            .collect()
    }
}

/// DE/rand/1/bin. Stops after `generations` or when the budget runs out,
/// whichever comes first; `iterations` reports completed generations.
pub fn solve_de(seed: u64, state: &NetworkState, params: &DeParams) -> SolveResult {
    let start = Instant::now();
    let deadline = params.budget_s.map(|b| start + Duration::from_secs_f64(b));
    let decoder = Decoder::new(state);
    let dim = decoder.users.len();
    let mut rng = seed::rng(seed);
    let np = params.pop_size.max(4);

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut fit: Vec<f64> = pop.iter().map(|g| decoder.fitness(g)).collect();

    let mut generations = 0;
    if dim > 0 {
        while generations < params.generations
            && deadline.is_none_or(|d| Instant::now() < d)
        {
            for i in 0..np {
                let picks = loop {
                    let s = sample(&mut rng, np, 3);
                    let (a, b, c) = (s.index(0), s.index(1), s.index(2));
                    if a != i && b != i && c != i {
                        break (a, b, c);
                    }
                };
                let forced = rng.gen_range(0..dim);
                let trial: Vec<f64> = (0..dim)
                    .map(|j| {
                        if j == forced || rng.gen::<f64>() < params.crossover_rate {
                            let v = pop[picks.0][j]
                                + params.differential_weight * (pop[picks.1][j] - pop[picks.2][j]);
                            v.clamp(0.0, 1.0)
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect();
                let f = decoder.fitness(&trial);
                if f >= fit[i] {
                    pop[i] = trial;
                    fit[i] = f;
                }
            }
            generations += 1;
        }
    }

    let best = (0..np)
        .max_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(b.cmp(&a)))
        .expect("population is non-empty");
    SolveResult::new(
        NAME,
        Allocation::new(state.slot(), decoder.decode(&pop[best])),
        state,
        start.elapsed(),
        generations,
    )
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DifferentialEvolution {
    pub params: DeParams,
}

impl Solver for DifferentialEvolution {
    fn name(&self) -> &str {
        NAME
    }

    fn solve(&self, state: &NetworkState, ctx: &SolveContext) -> Result<SolveResult, SolverError> {
        let p = &self.params;
        if p.pop_size < 4 || !(0.0..=1.0).contains(&p.crossover_rate) {
            return Err(SolverError::InvalidParams {
                solver: NAME.into(),
                message: "pop_size must be >= 4 and crossover_rate in [0, 1]".into(),
            });
        }
        let mut params = *p;
        if let Some(b) = ctx.budget {
            params.budget_s = Some(b.as_secs_f64());
        }
        Ok(solve_de(ctx.seed, state, &params))
    }

    fn is_time_budgeted(&self) -> bool {
        self.params.budget_s.is_some()
    }
}
