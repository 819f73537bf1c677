//! Single-cell wireless environment: topology, traffic, link budget and
//! achievable rates.
//!
//! The base station sits at the origin. Users are dropped uniformly on the
//! disk of radius `cell_radius_m`, which is the law of a homogeneous Poisson
//! point process conditioned on its point count. Each slot a subset of users
//! requests access and a subset of channels is held by primary users.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetEnvError {
    #[error("invalid link parameters: {0}")]
    InvalidLink(String),
    #[error("user is co-located with the base station and no distance floor is configured")]
    ZeroDistance,
    #[error("normalized distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("traffic range [{k_min}, {k_max}] exceeds population of {population}")]
    RangeExceedsPopulation {
        k_min: usize,
        k_max: usize,
        population: usize,
    },
    #[error("invalid network state: {0}")]
    InvalidState(String),
}

/// Link-budget parameters shared by every user in the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    pub tx_power_dbm: f64,
    /// Linear transmit antenna gain.
    pub antenna_gain_tx: f64,
    /// Linear receive antenna gain.
    pub antenna_gain_rx: f64,
    pub wavelength_m: f64,
    pub path_loss_exp: f64,
    pub noise_density_dbm_hz: f64,
    pub cell_radius_m: f64,
    /// Lower bound applied to the normalized distance. Zero disables the
    /// floor, in which case a user at the base station is an error.
    pub min_norm_distance: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            antenna_gain_tx: 1.0,
            antenna_gain_rx: 1.0,
            wavelength_m: 0.125,
            path_loss_exp: 3.5,
            noise_density_dbm_hz: -112.0,
            cell_radius_m: 500.0,
            min_norm_distance: 1e-3,
        }
    }
}

impl LinkParams {
    /// Default parameters with 50 dBi antennas on both ends, which puts the
    /// cell-edge SNR near 0 dB on a 12.5 MHz channel. The benchmark presets
    /// use this so that assignments actually change throughput.
    pub fn calibrated() -> Self {
        Self {
            antenna_gain_tx: 1e5,
            antenna_gain_rx: 1e5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetEnvError> {
        let bad = |msg: &str| Err(NetEnvError::InvalidLink(msg.to_string()));
        if !self.tx_power_dbm.is_finite() {
            return bad("tx_power_dbm must be finite");
        }
        if !(self.path_loss_exp > 2.0) {
            return bad("path_loss_exp must exceed 2");
        }
        if !(self.cell_radius_m > 0.0) || !self.cell_radius_m.is_finite() {
            return bad("cell_radius_m must be positive");
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return bad("wavelength_m must be positive");
        }
        if !(self.antenna_gain_tx > 0.0) || !(self.antenna_gain_rx > 0.0) {
            return bad("antenna gains must be positive");
        }
        if !self.noise_density_dbm_hz.is_finite() {
            return bad("noise_density_dbm_hz must be finite");
        }
        if !(0.0..1.0).contains(&self.min_norm_distance) {
            return bad("min_norm_distance must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise power spectral density in W/Hz.
    pub fn noise_density_watts_hz(&self) -> f64 {
        dbm_to_watts(self.noise_density_dbm_hz)
    }

    /// Thermal noise power `N_0 * B` in watts.
    pub fn noise_power(&self, bandwidth_hz: f64) -> f64 {
        self.noise_density_watts_hz() * bandwidth_hz
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserNode {
    pub id: UserId,
    pub x_m: f64,
    pub y_m: f64,
}

impl UserNode {
    pub fn new(id: u32, x_m: f64, y_m: f64) -> Self {
        Self {
            id: UserId(id),
            x_m,
            y_m,
        }
    }

    pub fn distance_m(&self) -> f64 {
        self.x_m.hypot(self.y_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: ChannelId,
    pub bandwidth_hz: f64,
    /// Held by a primary user this slot.
    pub occupied: bool,
}

impl ChannelSpec {
    pub fn new(id: u32, bandwidth_hz: f64, occupied: bool) -> Self {
        Self {
            id: ChannelId(id),
            bandwidth_hz,
            occupied,
        }
    }
}

/// Full physical state of one scheduling slot.
///
/// Users, channels and active ids are kept sorted by id; lookups rely on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    slot: u64,
    users: Vec<UserNode>,
    channels: Vec<ChannelSpec>,
    active_ids: Vec<UserId>,
    link: LinkParams,
    rng_seed: u64,
}

impl NetworkState {
    pub fn new(
        slot: u64,
        mut users: Vec<UserNode>,
        mut channels: Vec<ChannelSpec>,
        mut active_ids: Vec<UserId>,
        link: LinkParams,
        rng_seed: u64,
    ) -> Result<Self, NetEnvError> {
        link.validate()?;
        let invalid = |msg: String| Err(NetEnvError::InvalidState(msg));

        users.sort_by_key(|u| u.id);
        if let Some(w) = users.windows(2).find(|w| w[0].id == w[1].id) {
            return invalid(format!("duplicate user id {}", w[0].id));
        }
        let limit = link.cell_radius_m * (1.0 + 1e-9);
        if let Some(u) = users
            .iter()
            .find(|u| !(u.x_m.is_finite() && u.y_m.is_finite() && u.distance_m() <= limit))
        {
            return invalid(format!("user {} lies outside the cell", u.id));
        }

        channels.sort_by_key(|c| c.id);
        if let Some(w) = channels.windows(2).find(|w| w[0].id == w[1].id) {
            return invalid(format!("duplicate channel id {}", w[0].id));
        }
        if let Some(c) = channels
            .iter()
            .find(|c| !(c.bandwidth_hz > 0.0 && c.bandwidth_hz.is_finite()))
        {
            return invalid(format!("channel {} has non-positive bandwidth", c.id));
        }

        active_ids.sort();
        if let Some(w) = active_ids.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("user {} listed as active twice", w[0]));
        }
        if let Some(id) = active_ids
            .iter()
            .find(|id| users.binary_search_by_key(*id, |u| u.id).is_err())
        {
            return invalid(format!("active user {id} is not registered"));
        }

        Ok(Self {
            slot,
            users,
            channels,
            active_ids,
            link,
            rng_seed,
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn users(&self) -> &[UserNode] {
        &self.users
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn active_ids(&self) -> &[UserId] {
        &self.active_ids
    }

    pub fn link(&self) -> &LinkParams {
        &self.link
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn user(&self, id: UserId) -> Option<&UserNode> {
        self.users
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.users[i])
    }

    pub fn channel(&self, id: ChannelId) -> Option<&ChannelSpec> {
        self.channels
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.channels[i])
    }

    pub fn is_active(&self, id: UserId) -> bool {
        self.active_ids.binary_search(&id).is_ok()
    }

    pub fn is_idle(&self, id: ChannelId) -> bool {
        self.channel(id).is_some_and(|c| !c.occupied)
    }

    /// Idle channel ids in ascending order.
    pub fn idle_channels(&self) -> Vec<ChannelId> {
        self.channels
            .iter()
            .filter(|c| !c.occupied)
            .map(|c| c.id)
            .collect()
    }

    /// Same state with a different active set.
    pub fn with_active(&self, active_ids: Vec<UserId>) -> Result<Self, NetEnvError> {
        Self::new(
            self.slot,
            self.users.clone(),
            self.channels.clone(),
            active_ids,
            self.link,
            self.rng_seed,
        )
    }

    /// Received power of a registered user (channel independent).
    pub fn user_power(&self, id: UserId) -> Option<f64> {
        let user = self.user(id)?;
        let d = normalized_distance(user, &self.link).ok()?;
        received_power(&self.link, d).ok()
    }

    /// Interference-free rate of `user` on `channel`, or `None` if either id
    /// is unknown.
    pub fn pair_rate(&self, user: UserId, channel: ChannelId) -> Option<f64> {
        let power = self.user_power(user)?;
        let ch = self.channel(channel)?;
        Some(achievable_rate(
            power,
            0.0,
            ch.bandwidth_hz,
            self.link.noise_density_dbm_hz,
        ))
    }
}

/// Drops `num_users` users uniformly on the cell disk.
pub fn sample_topology(seed: u64, num_users: usize, link: &LinkParams) -> Vec<UserNode> {
    let mut rng = seed::rng(seed::derive(seed, stream::TOPOLOGY, 0));
    (0..num_users)
        .map(|i| {
            // Inverse-CDF of the radial law r^2 / R^2.
            let r = link.cell_radius_m * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            let (x, y) = (r * theta.cos(), r * theta.sin());
            // Rounding in cos/sin can push a boundary point a hair outside.
            let scale = if x.hypot(y) > link.cell_radius_m {
                link.cell_radius_m / x.hypot(y)
            } else {
                1.0
            };
            UserNode::new(i as u32, x * scale, y * scale)
        })
        .collect()
}

/// Distance to the base station divided by the cell radius, floored at
/// `link.min_norm_distance`.
pub fn normalized_distance(user: &UserNode, link: &LinkParams) -> Result<f64, NetEnvError> {
    let d = user.distance_m() / link.cell_radius_m;
    if d == 0.0 && link.min_norm_distance == 0.0 {
        return Err(NetEnvError::ZeroDistance);
    }
    Ok(d.max(link.min_norm_distance))
}

/// Log-distance received power in watts.
pub fn received_power(link: &LinkParams, d_norm: f64) -> Result<f64, NetEnvError> {
    if !(d_norm > 0.0) || !d_norm.is_finite() {
        return Err(NetEnvError::NonPositiveDistance(d_norm));
    }
    let ratio = link.wavelength_m / (4.0 * PI * d_norm * link.cell_radius_m);
    Ok(link.tx_power_watts()
        * link.antenna_gain_tx
        * link.antenna_gain_rx
        * ratio.powf(link.path_loss_exp))
}

/// Shannon-Hartley rate `B log2(1 + P / (N_0 B + I))` in bit/s.
pub fn achievable_rate(
    power_w: f64,
    interference_w: f64,
    bandwidth_hz: f64,
    noise_density_dbm_hz: f64,
) -> f64 {
    let noise = dbm_to_watts(noise_density_dbm_hz) * bandwidth_hz;
    let sinr = power_w / (noise + interference_w);
    // ln_1p keeps precision at the very low SINRs typical of cell-edge users.
    bandwidth_hz * sinr.ln_1p() / LN_2
}

/// Interference-free rates, one row per active user (ascending id) and one
/// column per channel (ascending id, occupied channels included).
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    users: Vec<UserId>,
    channels: Vec<ChannelId>,
    rates: Vec<f64>,
}

impl RateMatrix {
    pub fn rows(&self) -> usize {
        self.users.len()
    }

    pub fn cols(&self) -> usize {
        self.channels.len()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rates[row * self.channels.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.channels.len();
        &self.rates[row * c..(row + 1) * c]
    }

    /// Rate by ids; `None` when the user is not active or the channel is
    /// unknown.
    pub fn rate(&self, user: UserId, channel: ChannelId) -> Option<f64> {
        let r = self.users.binary_search(&user).ok()?;
        let c = self.channels.binary_search(&channel).ok()?;
        Some(self.get(r, c))
    }
}

pub fn rate_matrix(state: &NetworkState) -> RateMatrix {
    let users = state.active_ids.clone();
    let channels: Vec<ChannelId> = state.channels.iter().map(|c| c.id).collect();
    let noise = state.link.noise_density_dbm_hz;
    let mut rates = Vec::with_capacity(users.len() * channels.len());
    for &u in &users {
        let power = state.user_power(u).unwrap_or(0.0);
        rates.extend(
            state
                .channels
                .iter()
                .map(|c| achievable_rate(power, 0.0, c.bandwidth_hz, noise)),
        );
    }
    RateMatrix {
        users,
        channels,
        rates,
    }
}

/// Draws the active set for `state.slot()`: a uniform count in
/// `[k_min, k_max]`, then that many distinct users without replacement.
pub fn step_traffic(
    seed: u64,
    state: &NetworkState,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<UserId>, NetEnvError> {
    let population = state.users.len();
    if k_min > k_max || k_max > population {
        return Err(NetEnvError::RangeExceedsPopulation {
            k_min,
            k_max,
            population,
        });
    }
    let mut rng = seed::rng(seed::derive(seed, stream::TRAFFIC, state.slot));
    let k = rng.gen_range(k_min..=k_max);
    let mut ids: Vec<UserId> = rand::seq::index::sample(&mut rng, population, k)
        .into_iter()
        .map(|i| state.users[i].id)
        .collect();
    ids.sort();
    Ok(ids)
}

/// Shape and physics of a simulated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_users: usize,
    pub num_channels: usize,
    pub k_min: usize,
    pub k_max: usize,
    /// Fraction of channels held by primary users each slot.
    #[serde(default)]
    pub occupied_fraction: f64,
    #[serde(default = "default_bw_min")]
    pub bandwidth_min_hz: f64,
    #[serde(default = "default_bw_max")]
    pub bandwidth_max_hz: f64,
    #[serde(default)]
    pub link: LinkParams,
}

fn default_bw_min() -> f64 {
    5e6
}

fn default_bw_max() -> f64 {
    20e6
}

impl EnvConfig {
    /// `(U, C, K)` scenario with a fixed per-slot requester count.
    pub fn shape(num_users: usize, num_channels: usize, k_active: usize) -> Self {
        Self {
            num_users,
            num_channels,
            k_min: k_active,
            k_max: k_active,
            occupied_fraction: 0.0,
            bandwidth_min_hz: default_bw_min(),
            bandwidth_max_hz: default_bw_max(),
            link: LinkParams::default(),
        }
    }

    pub fn with_link(mut self, link: LinkParams) -> Self {
        self.link = link;
        self
    }

    pub fn occupied_channels(&self) -> usize {
        (self.occupied_fraction * self.num_channels as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<(), NetEnvError> {
        self.link.validate()?;
        if self.k_min > self.k_max || self.k_max > self.num_users {
            return Err(NetEnvError::RangeExceedsPopulation {
                k_min: self.k_min,
                k_max: self.k_max,
                population: self.num_users,
            });
        }
        if !(0.0..1.0).contains(&self.occupied_fraction) {
            return Err(NetEnvError::InvalidState(
                "occupied_fraction must lie in [0, 1)".into(),
            ));
        }
        if !(self.bandwidth_min_hz > 0.0 && self.bandwidth_min_hz <= self.bandwidth_max_hz) {
            return Err(NetEnvError::InvalidState(
                "bandwidth range must be positive and ordered".into(),
            ));
        }
        Ok(())
    }
}

/// One episode of a cell: topology and channel bandwidths are fixed, while
/// occupancy and traffic are redrawn every slot.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    seed: u64,
    users: Vec<UserNode>,
    bandwidths: Vec<f64>,
}

impl Environment {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, NetEnvError> {
        config.validate()?;
        let users = sample_topology(seed, config.num_users, &config.link);
        let mut rng = seed::rng(seed::derive(seed, stream::CHANNELS, 0));
        let bandwidths = (0..config.num_channels)
            .map(|_| {
                if config.bandwidth_max_hz > config.bandwidth_min_hz {
                    rng.gen_range(config.bandwidth_min_hz..config.bandwidth_max_hz)
                } else {
                    config.bandwidth_min_hz
                }
            })
            .collect();
        Ok(Self {
            config,
            seed,
            users,
            bandwidths,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self, slot: u64) -> Result<NetworkState, NetEnvError> {
        let mut rng = seed::rng(seed::derive(self.seed, stream::OCCUPANCY, slot));
        let mut order: Vec<usize> = (0..self.config.num_channels).collect();
        order.shuffle(&mut rng);
        let mut occupied = vec![false; self.config.num_channels];
        for &i in order.iter().take(self.config.occupied_channels()) {
            occupied[i] = true;
        }
        let channels = self
            .bandwidths
            .iter()
            .zip(&occupied)
            .enumerate()
            .map(|(i, (&bw, &occ))| ChannelSpec::new(i as u32, bw, occ))
            .collect();
        let state = NetworkState::new(
            slot,
            self.users.clone(),
            channels,
            Vec::new(),
            self.config.link,
            self.seed,
        )?;
        let active = step_traffic(self.seed, &state, self.config.k_min, self.config.k_max)?;
        state.with_active(active)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_rel(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    #[test]
    fn topology_empty_and_inside_cell() {
        let link = LinkParams::default();
        assert!(sample_topology(7, 0, &link).is_empty());
        let users = sample_topology(3, 2000, &link);
        assert!(users.iter().all(|u| u.distance_m() <= 500.0));
        assert_eq!(users, sample_topology(3, 2000, &link));
    }

    #[test]
    fn topology_mean_radius_matches_uniform_disk() {
        // E[r] = 2R/3 and Var[r] = R^2/2 - 4R^2/9 = R^2/18 for the uniform disk.
        let link = LinkParams::default();
        let users = sample_topology(42, 1000, &link);
        let mean = users.iter().map(UserNode::distance_m).sum::<f64>() / 1000.0;
        let se = (500.0f64.powi(2) / 18.0).sqrt() / 1000f64.sqrt();
        assert!((mean - 2.0 / 3.0 * 500.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn normalized_distance_cases() {
        let link = LinkParams::default();
        let d = |x, y| normalized_distance(&UserNode::new(0, x, y), &link).unwrap();
        assert_eq!(d(500.0, 0.0), 1.0);
        assert_eq!(d(300.0, 400.0), 1.0);
        assert_eq!(d(100.0, 0.0), 0.2);
        assert_eq!(d(0.0, 0.0), 1e-3);

        let no_floor = LinkParams {
            min_norm_distance: 0.0,
            ..link
        };
        assert_eq!(
            normalized_distance(&UserNode::new(0, 0.0, 0.0), &no_floor),
            Err(NetEnvError::ZeroDistance)
        );
    }

    #[test]
    fn received_power_unit_ratio_and_scaling() {
        let d_norm = 0.3;
        let link = LinkParams {
            wavelength_m: 4.0 * PI * d_norm * 500.0,
            ..LinkParams::default()
        };
        let p = received_power(&link, d_norm).unwrap();
        assert!(approx_rel(p, link.tx_power_watts(), 1e-12));

        let link = LinkParams::default();
        let p1 = received_power(&link, 0.2).unwrap();
        let p2 = received_power(&link, 0.4).unwrap();
        assert!(approx_rel(p2 / p1, 2f64.powf(-3.5), 1e-12));

        assert_eq!(
            received_power(&link, 0.0),
            Err(NetEnvError::NonPositiveDistance(0.0))
        );
    }

    #[test]
    fn received_power_default_oracle() {
        // 23 dBm, alpha 3.5, lambda 0.125 m, unit gains, 100 m; evaluated
        // independently at 40 significant digits.
        let p = received_power(&LinkParams::default(), 0.2).unwrap();
        assert!(approx_rel(p, 1.958621517846272793678895e-15, 1e-12), "{p:e}");
    }

    #[test]
    fn achievable_rate_cases() {
        assert_eq!(achievable_rate(0.0, 0.0, 1e6, -112.0), 0.0);

        // SNR of exactly 3 => log2(4) = 2 bits/s/Hz.
        let noise = dbm_to_watts(-112.0) * 1e6;
        let r = achievable_rate(3.0 * noise, 0.0, 1e6, -112.0);
        assert!(approx_rel(r, 2e6, 1e-12));

        // -112 dBm/Hz, 10 MHz, 1 nW; high-precision oracle.
        let r = achievable_rate(1e-9, 0.0, 1e7, -112.0);
        assert!(approx_rel(r, 226858.7320472824437851825, 1e-12), "{r}");
    }

    #[test]
    fn dbm_round_trip() {
        for w in [1e-18, 3.3e-9, 0.2, 1.0, 47.0] {
            assert!(approx_rel(dbm_to_watts(watts_to_dbm(w)), w, 1e-12));
        }
    }

    fn small_state() -> NetworkState {
        let users = vec![UserNode::new(0, 50.0, 0.0), UserNode::new(1, 0.0, 200.0)];
        let channels = vec![ChannelSpec::new(0, 5e6, false), ChannelSpec::new(1, 5e6, true)];
        NetworkState::new(0, users, channels, vec![UserId(1), UserId(0)], LinkParams::default(), 0)
            .unwrap()
    }

    #[test]
    fn rate_matrix_shapes() {
        let state = small_state();
        let m = rate_matrix(&state);
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.users(), &[UserId(0), UserId(1)]);
        // Equal bandwidths => constant rows.
        for r in 0..2 {
            assert_eq!(m.get(r, 0), m.get(r, 1));
        }
        let empty = state.with_active(vec![]).unwrap();
        assert_eq!(rate_matrix(&empty).rows(), 0);
    }

    #[test]
    fn traffic_bounds_and_determinism() {
        let state = small_state();
        assert!(step_traffic(1, &state, 0, 0).unwrap().is_empty());
        assert_eq!(step_traffic(1, &state, 2, 2).unwrap(), vec![UserId(0), UserId(1)]);
        assert_eq!(
            step_traffic(9, &state, 0, 2).unwrap(),
            step_traffic(9, &state, 0, 2).unwrap()
        );
        assert!(matches!(
            step_traffic(1, &state, 1, 3),
            Err(NetEnvError::RangeExceedsPopulation { .. })
        ));
    }

    #[test]
    fn state_validation() {
        let link = LinkParams::default();
        let users = vec![UserNode::new(0, 600.0, 0.0)];
        assert!(NetworkState::new(0, users, vec![], vec![], link, 0).is_err());
        let users = vec![UserNode::new(0, 1.0, 0.0)];
        assert!(NetworkState::new(0, users, vec![], vec![UserId(4)], link, 0).is_err());
        let bad = LinkParams {
            path_loss_exp: 2.0,
            ..link
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn environment_slots_are_reproducible() {
        let cfg = EnvConfig {
            occupied_fraction: 0.25,
            ..EnvConfig::shape(10, 8, 3)
        };
        let env = Environment::new(cfg.clone(), 5).unwrap();
        let s = env.state(4).unwrap();
        assert_eq!(s, Environment::new(cfg, 5).unwrap().state(4).unwrap());
        assert_eq!(s.active_ids().len(), 3);
        assert_eq!(s.idle_channels().len(), 6);
        assert!(s
            .channels()
            .iter()
            .all(|c| (5e6..20e6).contains(&c.bandwidth_hz)));
    }
}
