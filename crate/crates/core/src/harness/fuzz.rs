//! Randomized audit of the repair operator against a reference oracle.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{is_feasible, RawAction};
use crate::netenv::{ChannelId, EnvConfig, Environment, LinkParams, NetworkState, UserId};
use crate::repair::repair;
use crate::seed::{self, stream};

/// Kinds of raw mapping the fuzzer draws, uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawKind {
    Empty,
    /// Ids drawn from a range wider than the cell.
    Malformed,
    /// Every requester piles onto one or two channels.
    Contended,
    /// Targets only occupied channels where possible.
    Occupied,
    Mixed,
}

const KINDS: [RawKind; 5] = [
    RawKind::Empty,
    RawKind::Malformed,
    RawKind::Contended,
    RawKind::Occupied,
    RawKind::Mixed,
];

/// Deterministic fuzz case number `index` of run `base_seed`.
pub fn fuzz_case(base_seed: u64, index: u64) -> (NetworkState, RawAction, RawKind) {
    let mut rng = seed::rng(seed::derive(base_seed, stream::SOLVER, index));
    let users = rng.gen_range(1..=24);
    let channels = rng.gen_range(1..=24);
    let k = rng.gen_range(0..=users);
    let mut cfg = EnvConfig::shape(users, channels, k).with_link(LinkParams::calibrated());
    cfg.occupied_fraction = rng.gen_range(0.0..0.9);
    let state = Environment::new(cfg, rng.gen())
        .and_then(|env| env.state(rng.gen_range(0..50)))
        .expect("fuzz shapes are valid");

    let kind = KINDS[rng.gen_range(0..KINDS.len())];
    let (u, c) = (users as u32, channels as u32);
    let occupied: Vec<u32> = state.channels().iter().filter(|ch| ch.occupied).map(|ch| ch.id.0).collect();
    let mut raw = RawAction::new();
    let pairs = rng.gen_range(0..=2 * users);
    match kind {
        RawKind::Empty => {}
        RawKind::Malformed => {
            for _ in 0..pairs {
                raw.insert(UserId(rng.gen_range(0..u + 5)), ChannelId(rng.gen_range(0..c + 5)));
            }
        }
        RawKind::Contended => {
            let hot = [rng.gen_range(0..c), rng.gen_range(0..c)];
            for &user in state.active_ids() {
                raw.insert(user, ChannelId(hot[rng.gen_range(0..2)]));
            }
        }
        RawKind::Occupied => {
            for _ in 0..pairs {
                let ch = if occupied.is_empty() {
                    rng.gen_range(0..c)
                } else {
                    occupied[rng.gen_range(0..occupied.len())]
                };
                raw.insert(UserId(rng.gen_range(0..u)), ChannelId(ch));
            }
        }
        RawKind::Mixed => {
            for _ in 0..pairs {
                let user = if rng.gen_bool(0.8) { rng.gen_range(0..u) } else { rng.gen_range(u..u + 3) };
                raw.insert(UserId(user), ChannelId(rng.gen_range(0..c + 2)));
            }
        }
    }
    (state, raw, kind)
}

/// Reference winner of every contended idle channel: the valid claimant with
/// the strictly highest rate, scanning claimants in id order.
pub fn contention_winners(raw: &RawAction, state: &NetworkState) -> BTreeMap<ChannelId, UserId> {
    let mut claims: BTreeMap<ChannelId, Vec<UserId>> = BTreeMap::new();
    for (&u, &c) in raw {
        if state.active_ids().contains(&u) && state.idle_channels().contains(&c) {
            claims.entry(c).or_default().push(u);
        }
    }
    let mut winners = BTreeMap::new();
    for (c, mut us) in claims {
        if us.len() < 2 {
            continue;
        }
        us.sort();
        let mut best = us[0];
        let mut best_rate = state.pair_rate(best, c).expect("valid pair");
        for &u in &us[1..] {
            let r = state.pair_rate(u, c).expect("valid pair");
            if r > best_rate {
                best = u;
                best_rate = r;
            }
        }
        winners.insert(c, best);
    }
    winners
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub cases: u64,
    pub infeasible: u64,
    pub not_idempotent: u64,
    /// Contended channels not awarded to the reference winner.
    pub winner_mismatches: u64,
    /// Uncontended valid pairs that were not kept.
    pub dropped_valid_pairs: u64,
    /// Requesters left unserved although idle channels remained.
    pub underfilled: u64,
    pub contended_channels: u64,
    pub first_failure: Option<String>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.infeasible + self.not_idempotent + self.winner_mismatches + self.dropped_valid_pairs + self.underfilled
            == 0
    }
}

pub fn repair_fuzz(n: u64, base_seed: u64) -> FuzzReport {
    let mut report = FuzzReport::default();
    for i in 0..n {
        let (state, raw, kind) = fuzz_case(base_seed, i);
        let out = repair(&raw, &state).allocation;
        let mut failures = Vec::new();

        if !is_feasible(&out, &state).is_feasible() {
            report.infeasible += 1;
            failures.push("infeasible");
        }
        if repair(&out.assignment, &state).allocation != out {
            report.not_idempotent += 1;
            failures.push("not idempotent");
        }
        let winners = contention_winners(&raw, &state);
        report.contended_channels += winners.len() as u64;
        if winners.iter().any(|(c, u)| out.assignment.get(u) != Some(c)) {
            report.winner_mismatches += 1;
            failures.push("winner mismatch");
        }
        let valid: Vec<(&UserId, &ChannelId)> =
            raw.iter().filter(|(u, c)| state.is_active(**u) && state.is_idle(**c)).collect();
        let kept = valid.iter().all(|&(u, c)| {
            let uncontended = valid.iter().filter(|(_, x)| *x == c).count() == 1;
            !uncontended || out.assignment.get(u) == Some(c)
        });
        if !kept {
            report.dropped_valid_pairs += 1;
            failures.push("dropped a valid pair");
        }
        if out.len() != state.active_ids().len().min(state.idle_channels().len()) {
            report.underfilled += 1;
            failures.push("underfilled");
        }
        if report.first_failure.is_none() && !failures.is_empty() {
            report.first_failure = Some(format!("case {i} ({kind:?}): {}", failures.join(", ")));
        }
        report.cases += 1;
    }
    report
}
