//! Deterministic repair of raw user to channel mappings.
//!
//! Three stages, applied in order:
//!
//! 1. drop pairs whose user is not requesting this slot or whose channel is
//!    not idle;
//! 2. on every idle channel claimed by several users keep the claimant with
//!    the highest rate on that channel (ties: lowest user id);
//! 3. hand the residual idle channels to the still unserved users,
//!    best-rate-first (ties: lowest user id, then lowest channel id).
//!
//! With at least as many idle channels as requesters every requester ends up
//! served; otherwise channels run out and the remainder is reported.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, RawAction};
use crate::netenv::{ChannelId, NetworkState, UserId};

thread_local! {
    static INVOCATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`repair`] calls made on the current thread.
pub fn invocation_count() -> u64 {
    INVOCATIONS.with(Cell::get)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub allocation: Allocation,
    /// Raw pairs kept verbatim.
    pub kept_suggestions: usize,
    /// Channels claimed by more than one valid pair.
    pub contention_events: usize,
    /// Valid pairs dropped because another claimant won their channel.
    pub contention_losers: usize,
    /// Pairs dropped in the filtering stage.
    pub invalid_pairs: usize,
    pub greedy_fills: usize,
    /// Requesters left without a channel (idle channels exhausted).
    pub unserved: Vec<UserId>,
}

pub fn idle_channels(state: &NetworkState) -> Vec<ChannelId> {
    state.idle_channels()
}

fn by_rate_desc(a: (f64, u32), b: (f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

pub fn repair(raw: &RawAction, state: &NetworkState) -> RepairOutcome {
    INVOCATIONS.with(|n| n.set(n.get() + 1));

    // Stage 1: filter.
    let mut claims: BTreeMap<ChannelId, Vec<UserId>> = BTreeMap::new();
    let mut invalid_pairs = 0;
    for (&u, &c) in raw {
        if state.is_active(u) && state.is_idle(c) {
            claims.entry(c).or_default().push(u);
        } else {
            invalid_pairs += 1;
        }
    }

    // Stage 2: winner-take-all per contended channel.
    let mut assignment = RawAction::new();
    let mut kept_suggestions = 0;
    let mut contention_events = 0;
    let mut contention_losers = 0;
    for (&c, claimants) in &claims {
        if claimants.len() > 1 {
            contention_events += 1;
            contention_losers += claimants.len() - 1;
        }
        let winner = claimants
            .iter()
            .map(|&u| (state.pair_rate(u, c).unwrap_or(0.0), u.0))
            .min_by(|&a, &b| by_rate_desc(a, b))
            .map(|(_, u)| UserId(u))
            .expect("claims are non-empty");
        assignment.insert(winner, c);
        kept_suggestions += 1;
    }

    // Stage 3: greedy residual fill. The rate is strictly increasing in both
    // the user's received power and the channel bandwidth, so the global
    // best-rate-first order pairs the strongest unserved user with the widest
    // residual channel, repeatedly.
    let taken: BTreeSet<ChannelId> = assignment.values().copied().collect();
    let mut users: Vec<(f64, u32)> = state
        .active_ids()
        .iter()
        .filter(|u| !assignment.contains_key(u))
        .map(|&u| (state.user_power(u).unwrap_or(0.0), u.0))
        .collect();
    let mut channels: Vec<(f64, u32)> = state
        .channels()
        .iter()
        .filter(|c| !c.occupied && !taken.contains(&c.id))
        .map(|c| (c.bandwidth_hz, c.id.0))
        .collect();
    users.sort_by(|&a, &b| by_rate_desc(a, b));
    channels.sort_by(|&a, &b| by_rate_desc(a, b));

    let greedy_fills = users.len().min(channels.len());
    for (&(_, u), &(_, c)) in users.iter().zip(&channels) {
        assignment.insert(UserId(u), ChannelId(c));
    }
    let unserved = users[greedy_fills..]
        .iter()
        .map(|&(_, u)| UserId(u))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    RepairOutcome {
        allocation: Allocation::new(state.slot(), assignment),
        kept_suggestions,
        contention_events,
        contention_losers,
        invalid_pairs,
        greedy_fills,
        unserved,
    }
}
