//! JSON-over-HTTP client for an external text-generation service.
//!
//! Request body: `{"prompt": str, "max_tokens": int, "temperature": float, "n": 1}`.
//! Response body: `{"choices": [{"text": str}, ...]}`; the first choice is used.
//! One request is sent per candidate. A failed transport is retried once.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, CandidateBackend, GenerationRequest, GenerationResponse};
use crate::netenv::NetworkState;

pub(super) const NAME: &str = "remote";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout_s: f64,
    /// Environment variable holding a bearer token, if any.
    pub token_env: Option<String>,
    /// Extra attempts after a transport failure (0 or 1).
    pub retries: u8,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/completions".into(),
            timeout_s: 30.0,
            token_env: None,
            retries: 1,
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    timeout: Duration,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if !(config.timeout_s > 0.0) || config.retries > 1 || config.url.is_empty() {
            return Err(BackendError::InvalidParams {
                backend: NAME.into(),
                message: "url must be set, timeout_s positive and retries at most 1".into(),
            });
        }
        let timeout = Duration::from_secs_f64(config.timeout_s);
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            timeout,
            agent,
        })
    }

    fn token(&self) -> Option<String> {
        self.config
            .token_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
    }

    /// `Err(Ok(e))` is a transport failure worth retrying, `Err(Err(e))` a
    /// reply that asking again will not change.
    fn attempt(&self, body: &Value) -> Result<String, Result<BackendError, BackendError>> {
        let mut req = self.agent.post(&self.config.url);
        if let Some(token) = self.token() {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let response = req.send_json(body).map_err(|e| Ok(self.transport_error(e)))?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(Err(BackendError::BackendProtocolError(format!("HTTP status {status}"))));
        }
        let value: Value = response.into_body().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => Ok(BackendError::BackendTimeout(self.timeout)),
            other => Err(BackendError::BackendProtocolError(format!("response body: {other}"))),
        })?;
        value
            .get("choices")
            .and_then(Value::as_array)
            .and_then(|c| c.first())
            .and_then(|c| c.get("text"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Err(BackendError::BackendProtocolError("missing choices[0].text".into())))
    }

    fn transport_error(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::BackendTimeout(self.timeout),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                BackendError::BackendTimeout(self.timeout)
            }
            other => BackendError::BackendProtocolError(other.to_string()),
        }
    }

    fn complete(&self, body: &Value) -> Result<String, BackendError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(body) {
                Ok(text) => return Ok(text),
                Err(Ok(e)) if attempts > usize::from(self.config.retries) => return Err(e),
                Err(Ok(_)) => continue,
                Err(Err(e)) => return Err(e),
            }
        }
    }
}

impl CandidateBackend for RemoteBackend {
    fn name(&self) -> &str {
        NAME
    }

    fn generate(
        &self,
        _state: &NetworkState,
        request: &GenerationRequest,
    ) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        let start = Instant::now();
        let body = json!({
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "n": 1,
        });
        let texts = (0..request.num_candidates)
            .map(|_| self.complete(&body))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GenerationResponse {
            texts,
            latency: start.elapsed(),
            backend_name: NAME.into(),
        })
    }
}
