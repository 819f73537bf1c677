//! JSON benchmark configuration.
//!
//! ```json
//! {
//!   "presets": ["u5_c5_k1", "scale_i"],
//!   "scenarios": [{"id": "busy", "num_users": 30, "num_channels": 20, "k_active": 8,
//!                  "occupied_fraction": 0.25, "link": {"path_loss_exp": 3.0}}],
//!   "seeds": {"count": 100, "base": 0},
//!   "methods": [{"solver": "hungarian"}, {"backend": "mock", "params": {"valid": 0.78, "prose": 0.22}}],
//!   "generation": {"group_size": 8, "temperature": 1.0, "max_tokens": 1024},
//!   "serializer_budget": 2048,
//!   "time_equated": false,
//!   "reward": {"omega": 5.0},
//!   "train": {"seeds": [0, 1, 2], "grpo": {"steps": 300, "group_size": 8, "beta": 0.25}},
//!   "context": {"budgets": [1024, 2048, 4096]}
//! }
//! ```
//!
//! Every section is optional. `seeds` also accepts a plain list.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::presets;
use crate::backends::BackendRegistry;
use crate::grpo::{ToyPolicy, TrainConfig};
use crate::netenv::{EnvConfig, LinkParams};
use crate::reward::RewardWeights;
use crate::serializer::DEFAULT_BUDGET_TOKENS;
use crate::solvers::SolverRegistry;

use super::episode::{Method, MethodKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}, at `{field}`: {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkPreset {
    /// Link-budget defaults with 50 dBi antennas on both ends.
    #[default]
    Calibrated,
    /// Link-budget defaults unchanged.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub num_users: usize,
    pub num_channels: usize,
    pub k_active: usize,
    #[serde(default = "default_slots")]
    pub slots: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub occupied_fraction: f64,
    #[serde(default)]
    pub link_preset: LinkPreset,
    /// Field overrides applied on top of `link_preset`.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub link: Map<String, Value>,
}

fn default_slots() -> u64 {
    100
}

fn default_gamma() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn shape(id: &str, num_users: usize, num_channels: usize, k_active: usize) -> Self {
        Self {
            id: id.to_string(),
            num_users,
            num_channels,
            k_active,
            slots: default_slots(),
            gamma: default_gamma(),
            occupied_fraction: 0.0,
            link_preset: LinkPreset::Calibrated,
            link: Map::new(),
        }
    }

    pub fn link_params(&self) -> Result<LinkParams, String> {
        let base = match self.link_preset {
            LinkPreset::Calibrated => LinkParams::calibrated(),
            LinkPreset::Standard => LinkParams::default(),
        };
        let Value::Object(mut merged) = serde_json::to_value(base).map_err(|e| e.to_string())? else {
            unreachable!("LinkParams serializes to an object");
        };
        for (k, v) in &self.link {
            if !merged.contains_key(k) {
                return Err(format!("unknown link parameter `{k}`"));
            }
            merged.insert(k.clone(), v.clone());
        }
        let link: LinkParams = serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())?;
        link.validate().map_err(|e| e.to_string())?;
        Ok(link)
    }

    pub fn env_config(&self) -> Result<EnvConfig, String> {
        let mut cfg = EnvConfig::shape(self.num_users, self.num_channels, self.k_active)
            .with_link(self.link_params()?);
        cfg.occupied_fraction = self.occupied_fraction;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn expected_idle(&self) -> usize {
        self.num_channels - (self.occupied_fraction * self.num_channels as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { count: u64, #[serde(default)] base: u64 },
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self::Range { count: 10, base: 0 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Range { count, base } => (0..*count).map(|i| base + i).collect(),
        }
    }
}

/// One benchmarked method: exactly one of `solver` or `backend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default)]
    pub params: Value,
    /// Row label; defaults to the solver or backend name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MethodSpec {
    pub fn solver(name: &str) -> Self {
        Self {
            solver: Some(name.into()),
            backend: None,
            params: Value::Null,
            label: None,
        }
    }

    pub fn backend(name: &str, params: Value) -> Self {
        Self {
            solver: None,
            backend: Some(name.into()),
            params,
            label: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label
            .as_deref()
            .or(self.solver.as_deref())
            .or(self.backend.as_deref())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Candidates per slot (G).
    pub group_size: usize,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            temperature: 1.0,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Scenario id; the first scenario when absent.
    pub scenario: Option<String>,
    pub bins: usize,
    pub max_ranks: usize,
    pub temperature: f64,
    pub seeds: Vec<u64>,
    /// `seed` inside is replaced by each entry of `seeds`.
    pub grpo: TrainConfig,
    pub eval_seed: u64,
    pub eval_slots: u64,
    pub eval_samples: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            scenario: None,
            bins: 8,
            max_ranks: 16,
            temperature: 1.0,
            seeds: vec![0],
            grpo: TrainConfig::default(),
            eval_seed: 999_999,
            eval_slots: 100,
            eval_samples: 16,
        }
    }
}

impl TrainSection {
    pub fn initial_policy(&self) -> ToyPolicy {
        ToyPolicy::uniform(self.bins, self.max_ranks, self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextSection {
    pub budgets: Vec<usize>,
}

impl Default for ContextSection {
    fn default() -> Self {
        Self {
            budgets: vec![1024, 2048, 4096],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub presets: Vec<String>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_budget")]
    pub serializer_budget: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
    /// Give `grouped_hungarian` the measured generative latency as budget.
    #[serde(default)]
    pub time_equated: bool,
    #[serde(default)]
    pub reward: RewardWeights,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub context: ContextSection,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET_TOKENS
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            presets: Vec::new(),
            scenarios: Vec::new(),
            seeds: SeedSpec::default(),
            methods: Vec::new(),
            serializer_budget: default_budget(),
            generation: GenerationConfig::default(),
            time_equated: false,
            reward: RewardWeights::default(),
            train: TrainSection::default(),
            context: ContextSection::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Presets first, then explicit scenarios.
    pub fn resolve_scenarios(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        let mut out = Vec::new();
        for (i, name) in self.presets.iter().enumerate() {
            let s = presets::preset(name)
                .ok_or_else(|| ConfigError::invalid(format!("presets[{i}]"), format!("unknown preset `{name}`")))?;
            out.push(s);
        }
        out.extend(self.scenarios.iter().cloned());
        let mut ids = BTreeSet::new();
        for (i, s) in out.iter().enumerate() {
            if !ids.insert(s.id.clone()) {
                return Err(ConfigError::invalid(format!("scenarios[{i}].id"), format!("duplicate id `{}`", s.id)));
            }
        }
        Ok(out)
    }

    /// Checks every section and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        for (i, s) in self.resolve_scenarios()?.iter().enumerate() {
            let field = format!("scenario `{}`", s.id);
            s.env_config().map_err(|m| ConfigError::invalid(&field, m))?;
            if s.slots == 0 {
                return Err(ConfigError::invalid(format!("{field}.slots"), "must be at least 1"));
            }
            if !(s.gamma > 0.0 && s.gamma <= 1.0) {
                return Err(ConfigError::invalid(format!("{field}.gamma"), "must lie in (0, 1]"));
            }
            if s.k_active > s.expected_idle() {
                warnings.push(format!(
                    "scenario {i} `{}`: k_active {} exceeds the {} idle channels; some requesters go unserved",
                    s.id,
                    s.k_active,
                    s.expected_idle()
                ));
            }
        }
        if self.seeds.seeds().is_empty() {
            return Err(ConfigError::invalid("seeds", "no seeds"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if m.solver.is_some() == m.backend.is_some() {
                return Err(ConfigError::invalid(
                    format!("methods[{i}]"),
                    "exactly one of `solver` and `backend` is required",
                ));
            }
        }
        let labels: BTreeSet<_> = self.methods.iter().map(MethodSpec::label).collect();
        if labels.len() != self.methods.len() {
            return Err(ConfigError::invalid("methods", "labels must be unique"));
        }
        let g = &self.generation;
        if g.group_size == 0 || g.max_tokens == 0 || !(g.temperature >= 0.0) {
            return Err(ConfigError::invalid(
                "generation",
                "group_size and max_tokens must be positive and temperature non-negative",
            ));
        }
        self.reward.validate().map_err(|m| ConfigError::invalid("reward", m))?;
        if self.time_equated && self.methods.iter().all(|m| m.backend.is_none()) {
            return Err(ConfigError::invalid(
                "time_equated",
                "needs at least one backend method to measure",
            ));
        }
        Ok(warnings)
    }

    pub fn build_methods(
        &self,
        solvers: &SolverRegistry,
        backends: &BackendRegistry,
    ) -> Result<Vec<Method>, ConfigError> {
        self.methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let kind = match (&m.solver, &m.backend) {
                    (Some(name), None) => solvers
                        .create(name, &m.params)
                        .map(MethodKind::Solver)
                        .map_err(|e| ConfigError::invalid(format!("methods[{i}].solver"), e))?,
                    (None, Some(name)) => backends
                        .create(name, &m.params)
                        .map(MethodKind::Generative)
                        .map_err(|e| ConfigError::invalid(format!("methods[{i}].backend"), e))?,
                    _ => {
                        return Err(ConfigError::invalid(
                            format!("methods[{i}]"),
                            "exactly one of `solver` and `backend` is required",
                        ))
                    }
                };
                Ok(Method::new(m.label(), kind))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_field_and_line() {
        let text = "{\n  \"scenarios\": [\n    {\"id\": \"a\", \"num_users\": 3, \"num_channels\": 3, \"k_active\": 1, \"slotz\": 4}\n  ]\n}";
        match BenchConfig::from_json(text).unwrap_err() {
            ConfigError::Parse { field, line, message, .. } => {
                assert_eq!(line, 3);
                assert!(field.starts_with("scenarios[0]"), "{field}");
                assert!(message.contains("slotz"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn empty_object_is_a_valid_config() {
        let cfg = BenchConfig::from_json("{}").unwrap();
        assert_eq!(cfg, BenchConfig::default());
        assert_eq!(cfg.seeds.seeds(), (0..10).collect::<Vec<_>>());
        assert!(cfg.validate().unwrap().is_empty());
    }

    #[test]
    fn link_overrides_apply_on_the_preset() {
        let mut s = ScenarioConfig::shape("x", 4, 4, 2);
        s.link.insert("path_loss_exp".into(), 3.0.into());
        let link = s.link_params().unwrap();
        assert_eq!(link.path_loss_exp, 3.0);
        assert_eq!(link.antenna_gain_tx, LinkParams::calibrated().antenna_gain_tx);
        s.link.insert("gain".into(), 1.0.into());
        assert!(s.link_params().unwrap_err().contains("gain"));
    }

    #[test]
    fn validation_catches_bad_sections() {
        let cfg = BenchConfig::from_json(r#"{"presets": ["u9_c9_k9"]}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { field, .. }) if field == "presets[0]"));

        let cfg = BenchConfig::from_json(r#"{"methods": [{"solver": "random", "backend": "mock"}]}"#).unwrap();
        assert!(cfg.validate().is_err());

        let cfg = BenchConfig::from_json(r#"{"time_equated": true, "methods": [{"solver": "random"}]}"#).unwrap();
        assert!(cfg.validate().is_err());

        let cfg = BenchConfig::from_json(
            r#"{"scenarios": [{"id": "s", "num_users": 10, "num_channels": 4, "k_active": 6}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }

    #[test]
    fn unknown_method_names_are_config_errors() {
        let cfg = BenchConfig::from_json(r#"{"methods": [{"solver": "dqn"}]}"#).unwrap();
        let err = cfg
            .build_methods(&SolverRegistry::default(), &BackendRegistry::default())
            .unwrap_err();
        assert!(err.to_string().contains("methods[0].solver"));
    }
}
