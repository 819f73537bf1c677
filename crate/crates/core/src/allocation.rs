//! Allocations, hard-constraint checks, and the linear and quadratic utility
//! objectives.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netenv::{ChannelId, NetworkState, UserId};

/// Raw user to channel mapping, as parsed from a candidate or produced by a
/// solver. Carries no feasibility guarantee.
pub type RawAction = BTreeMap<UserId, ChannelId>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub slot: u64,
    pub assignment: RawAction,
}

impl Allocation {
    pub fn new(slot: u64, assignment: RawAction) -> Self {
        Self { slot, assignment }
    }

    pub fn empty(slot: u64) -> Self {
        Self::new(slot, RawAction::new())
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (UserId, ChannelId)> + '_ {
        self.assignment.iter().map(|(&u, &c)| (u, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Channel assigned to more than one user.
    DuplicateChannel,
    /// Channel held by a primary user.
    OccupiedChannel,
    /// User not registered or not requesting this slot.
    UnknownUser,
    UnknownChannel,
    /// User holding more than one channel.
    MultiAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// User id for user-side violations, channel id otherwise.
    pub subject: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("allocation violates hard constraints: {0:?}")]
    InfeasibleAllocation(Vec<Violation>),
}

/// Checks an arbitrary list of pairs. Unlike [`is_feasible`] this can see a
/// user listed twice.
pub fn check_pairs(pairs: &[(UserId, ChannelId)], state: &NetworkState) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut per_user: BTreeMap<UserId, usize> = BTreeMap::new();
    let mut per_channel: BTreeMap<ChannelId, usize> = BTreeMap::new();

    for &(u, c) in pairs {
        *per_user.entry(u).or_default() += 1;
        *per_channel.entry(c).or_default() += 1;
        if !state.is_active(u) {
            violations.push(Violation {
                kind: ViolationKind::UnknownUser,
                subject: u.0,
            });
        }
        match state.channel(c) {
            None => violations.push(Violation {
                kind: ViolationKind::UnknownChannel,
                subject: c.0,
            }),
            Some(ch) if ch.occupied => violations.push(Violation {
                kind: ViolationKind::OccupiedChannel,
                subject: c.0,
            }),
            Some(_) => {}
        }
    }
    violations.extend(
        per_user
            .iter()
            .filter(|(_, &n)| n > 1)
            .map(|(u, _)| Violation {
                kind: ViolationKind::MultiAssignment,
                subject: u.0,
            }),
    );
    violations.extend(
        per_channel
            .iter()
            .filter(|(_, &n)| n > 1)
            .map(|(c, _)| Violation {
                kind: ViolationKind::DuplicateChannel,
                subject: c.0,
            }),
    );
    FeasibilityReport { violations }
}

pub fn is_feasible(alloc: &Allocation, state: &NetworkState) -> FeasibilityReport {
    let pairs: Vec<_> = alloc.pairs().collect();
    check_pairs(&pairs, state)
}

/// Sum of interference-free rates over the assignment.
pub fn slot_utility(alloc: &Allocation, state: &NetworkState) -> Result<f64, AllocationError> {
    let report = is_feasible(alloc, state);
    if !report.is_feasible() {
        return Err(AllocationError::InfeasibleAllocation(report.violations));
    }
    Ok(lenient_throughput(&alloc.assignment, state))
}

/// Throughput of a raw mapping where pairs with an inactive user or a
/// missing or occupied channel contribute nothing. Duplicates are summed as
/// if they did not collide.
pub fn lenient_throughput(raw: &RawAction, state: &NetworkState) -> f64 {
    raw.iter()
        .filter(|(&u, &c)| state.is_active(u) && state.is_idle(c))
        .map(|(&u, &c)| state.pair_rate(u, c).unwrap_or(0.0))
        .sum()
}

/// Discounted episode utility `sum_t gamma^(t-1) u_t`.
pub fn episode_utility(slot_utilities: &[f64], gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for &u in slot_utilities {
        total += discount * u;
        discount *= gamma;
    }
    total
}

/// Sum-rate minus `eta` times the co-channel interference over ordered user
/// pairs sharing a channel. `interference(u, v, c)` is the pairwise penalty
/// between `u` and `v` on channel `c`; it must be symmetric and
/// non-negative.
pub fn quadratic_utility<F>(alloc: &Allocation, state: &NetworkState, eta: f64, interference: F) -> f64
where
    F: Fn(UserId, UserId, ChannelId) -> f64,
{
    let linear: f64 = alloc
        .pairs()
        .filter_map(|(u, c)| state.is_active(u).then(|| state.pair_rate(u, c)).flatten())
        .sum();

    let mut by_channel: HashMap<ChannelId, Vec<UserId>> = HashMap::new();
    for (u, c) in alloc.pairs() {
        by_channel.entry(c).or_default().push(u);
    }
    let mut penalty = 0.0;
    for (&c, users) in &by_channel {
        for &u in users {
            for &v in users {
                if u != v {
                    penalty += interference(u, v, c);
                }
            }
        }
    }
    linear - eta * penalty
}
