//! Classical channel-assignment baselines.
//!
//! Every baseline implements [`Solver`] and is registered by name in a
//! [`SolverRegistry`], so benchmark configs and the CLI select them at
//! runtime:
//!
//! | name                | strategy                                            |
//! |---------------------|-----------------------------------------------------|
//! | `random`            | uniform random injection into the idle channels     |
//! | `exhaustive`        | enumeration of every injective map (small sizes)    |
//! | `hungarian`         | Kuhn-Munkres maximum-weight matching                |
//! | `grouped_hungarian` | partitioned KM, re-partitioned under a time budget  |
//! | `de`                | DE/rand/1/bin over random-key genomes               |
//!
//! All of them return feasible allocations whose `objective` equals
//! [`slot_utility`](crate::allocation::slot_utility) of the allocation.

mod de;
mod exhaustive;
mod grouped;
mod hungarian;
mod random;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{slot_utility, Allocation};
use crate::netenv::NetworkState;

pub use de::{solve_de, DeParams, DifferentialEvolution};
pub use exhaustive::{solve_exhaustive, Exhaustive};
pub use grouped::{solve_grouped_hungarian, GroupedHungarian};
pub use hungarian::{max_weight_assignment, solve_hungarian, Hungarian};
pub use random::{solve_random, RandomAssignment};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance too large for exhaustive enumeration: {pairs} pairs exceed max size {max_size}")]
    SizeExceeded { pairs: usize, max_size: usize },
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("invalid parameters for solver `{solver}`: {message}")]
    InvalidParams { solver: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub allocation: Allocation,
    /// Sum-rate of `allocation` in bit/s.
    pub objective: f64,
    pub elapsed: Duration,
    pub solver_name: String,
    pub iterations: usize,
    /// Fewer idle channels than requesters; only a subset was served.
    pub partial: bool,
}

impl SolveResult {
    pub(crate) fn new(
        name: &str,
        allocation: Allocation,
        state: &NetworkState,
        elapsed: Duration,
        iterations: usize,
    ) -> Self {
        let objective = slot_utility(&allocation, state)
            .expect("solvers only emit feasible allocations");
        let partial = allocation.len() < state.active_ids().len();
        Self {
            allocation,
            objective,
            elapsed,
            solver_name: name.to_string(),
            iterations,
            partial,
        }
    }
}

/// Per-call inputs that vary between invocations of the same solver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveContext {
    pub seed: u64,
    /// Wall-clock budget overriding the solver's own, if it has one.
    pub budget: Option<Duration>,
}

impl SolveContext {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, budget: None }
    }
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &str;

    fn solve(&self, state: &NetworkState, ctx: &SolveContext) -> Result<SolveResult, SolverError>;

    /// Whether the result may depend on wall-clock time.
    fn is_time_budgeted(&self) -> bool {
        false
    }
}

pub type SolverFactory = fn(&serde_json::Value) -> Result<Box<dyn Solver>, SolverError>;

fn build<T>(name: &str, params: &serde_json::Value) -> Result<Box<dyn Solver>, SolverError>
where
    T: Solver + for<'de> Deserialize<'de> + 'static,
{
    let params = if params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        params.clone()
    };
    let solver: T = serde_json::from_value(params).map_err(|e| SolverError::InvalidParams {
        solver: name.to_string(),
        message: e.to_string(),
    })?;
    Ok(Box::new(solver))
}

/// Name to factory map of the available solvers.
#[derive(Clone)]
pub struct SolverRegistry {
    factories: BTreeMap<String, SolverFactory>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: SolverFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn create(
        &self,
        name: &str,
        params: &serde_json::Value,
    ) -> Result<Box<dyn Solver>, SolverError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| SolverError::UnknownSolver(name.to_string()))?;
        factory(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register(random::NAME, |p| build::<RandomAssignment>(random::NAME, p));
        registry.register(exhaustive::NAME, |p| build::<Exhaustive>(exhaustive::NAME, p));
        registry.register(hungarian::NAME, |p| build::<Hungarian>(hungarian::NAME, p));
        registry.register(grouped::NAME, |p| build::<GroupedHungarian>(grouped::NAME, p));
        registry.register(de::NAME, |p| build::<DifferentialEvolution>(de::NAME, p));
        registry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn registry_resolves_builtins() {
        let reg = SolverRegistry::default();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(
            names,
            ["de", "exhaustive", "grouped_hungarian", "hungarian", "random"]
        );
        for name in names {
            assert_eq!(reg.create(name, &json!(null)).unwrap().name(), name);
        }
        assert!(matches!(
            reg.create("dqn", &json!({})),
            Err(SolverError::UnknownSolver(_))
        ));
        assert!(matches!(
            reg.create("de", &json!({"pop_size": "many"})),
            Err(SolverError::InvalidParams { .. })
        ));
    }
}
