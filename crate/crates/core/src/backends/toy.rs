//! Candidates sampled from a [`ToyPolicy`].

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BackendError, CandidateBackend, GenerationRequest, GenerationResponse};
use crate::grpo::{ToyPolicy, MIN_OUTPUT_TOKENS};
use crate::seed::{self, stream};
use crate::netenv::NetworkState;
use crate::serializer::render_code_block;

pub(super) const NAME: &str = "toy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyBackendParams {
    /// Inline policy; takes precedence over `policy_path`.
    pub policy: Option<ToyPolicy>,
    /// JSON file holding a serialized policy, e.g. a training result.
    pub policy_path: Option<PathBuf>,
    pub bins: usize,
    pub max_ranks: usize,
}

impl Default for ToyBackendParams {
    fn default() -> Self {
        Self {
            policy: None,
            policy_path: None,
            bins: 8,
            max_ranks: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyBackend {
    policy: ToyPolicy,
}

impl ToyBackend {
    pub fn new(params: ToyBackendParams) -> Result<Self, BackendError> {
        let invalid = |message: String| BackendError::InvalidParams {
            backend: NAME.into(),
            message,
        };
        let policy = match (params.policy, params.policy_path) {
            (Some(p), _) => p,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
            }
            (None, None) => ToyPolicy::uniform(params.bins, params.max_ranks, 1.0),
        };
        policy.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(Self { policy })
    }

    pub fn from_policy(policy: ToyPolicy) -> Result<Self, BackendError> {
        Self::new(ToyBackendParams {
            policy: Some(policy),
            ..ToyBackendParams::default()
        })
    }
}

impl CandidateBackend for ToyBackend {
    fn name(&self) -> &str {
        NAME
    }

    /// Samples at the request temperature and pads each text to
    /// `min(512, max_tokens)` estimated tokens.
    fn generate(
        &self,
        state: &NetworkState,
        request: &GenerationRequest,
    ) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        if !(request.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        let start = Instant::now();
        let mut policy = self.policy.clone();
        policy.temperature = request.temperature.max(f64::MIN_POSITIVE);
        let layout = policy.layout(state);
        let pad = MIN_OUTPUT_TOKENS.min(request.max_tokens);
        let texts = (0..request.num_candidates)
            .map(|i| {
                let mut rng = seed::rng(seed::derive(request.seed, stream::GENERATE, i as u64));
                let (_, map) = policy.rollout(&layout, &mut rng);
                render_code_block(&map, pad)
            })
            .collect();
        Ok(GenerationResponse {
            texts,
            latency: start.elapsed(),
            backend_name: NAME.into(),
        })
    }
}
