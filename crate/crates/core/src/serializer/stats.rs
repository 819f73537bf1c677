use std::fmt;

use serde::{Deserialize, Serialize};

use crate::netenv::{ChannelId, NetworkState};

/// Idle channel ids listed verbatim in the statistics block; the rest are
/// summarized as a count.
pub const IDLE_LIST_CAP: usize = 32;

/// Descriptive statistics with population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    /// Single-pass (Welford) statistics; `None` for an empty input.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut n = 0u64;
        let (mut mean, mut m2) = (0.0, 0.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in values {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
            min = min.min(x);
            max = max.max(x);
        }
        (n > 0).then(|| Self {
            min,
            max,
            // Rounding can leave the mean a hair outside [min, max].
            mean: mean.clamp(min, max),
            std: (m2 / n as f64).max(0.0).sqrt(),
        })
    }
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "min={:.4e} max={:.4e} mean={:.4e} std={:.4e}",
            self.min, self.max, self.mean, self.std
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub k_t: usize,
    pub noise_density_dbm_hz: f64,
    /// First [`IDLE_LIST_CAP`] idle channel ids.
    pub idle_channel_ids: Vec<ChannelId>,
    pub idle_count: usize,
    /// Over the `K_t x |E_t|` received-power entries, in watts.
    pub power_stats: Option<Stats>,
    /// Over the idle channels, in hertz.
    pub bandwidth_stats: Option<Stats>,
}

pub fn summarize_state(state: &NetworkState) -> StatSummary {
    let idle: Vec<_> = state.channels().iter().filter(|c| !c.occupied).collect();
    let powers: Vec<f64> = state
        .active_ids()
        .iter()
        .map(|&u| state.user_power(u).unwrap_or(0.0))
        .collect();
    let power_stats = Stats::from_values(
        powers
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, idle.len())),
    );
    StatSummary {
        k_t: state.active_ids().len(),
        noise_density_dbm_hz: state.link().noise_density_dbm_hz,
        idle_channel_ids: idle.iter().take(IDLE_LIST_CAP).map(|c| c.id).collect(),
        idle_count: idle.len(),
        power_stats,
        bandwidth_stats: Stats::from_values(idle.iter().map(|c| c.bandwidth_hz)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netenv::{ChannelSpec, LinkParams, UserId, UserNode};

    #[test]
    fn single_entry_has_zero_spread() {
        let users = vec![UserNode::new(0, 30.0, 40.0)];
        let channels = vec![ChannelSpec::new(0, 7e6, false), ChannelSpec::new(1, 9e6, true)];
        let s = NetworkState::new(0, users, channels, vec![UserId(0)], LinkParams::default(), 0)
            .unwrap();
        let sum = summarize_state(&s);
        let p = sum.power_stats.unwrap();
        assert_eq!((p.min, p.max, p.mean, p.std), (p.min, p.min, p.min, 0.0));
        let b = sum.bandwidth_stats.unwrap();
        assert_eq!((b.min, b.max, b.std), (7e6, 7e6, 0.0));
        assert_eq!(sum.idle_count, 1);
    }

    #[test]
    fn empty_sets_have_no_stats() {
        let s = NetworkState::new(0, vec![], vec![], vec![], LinkParams::default(), 0).unwrap();
        let sum = summarize_state(&s);
        assert!(sum.power_stats.is_none() && sum.bandwidth_stats.is_none());
    }
}
