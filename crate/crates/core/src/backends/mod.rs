//! Candidate generators behind one interface: a scripted mock, the toy
//! policy, and a remote text-generation endpoint.

mod mock;
mod remote;
mod toy;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::netenv::NetworkState;

pub use mock::{MockBackend, MockMode, MockProportions};
pub use remote::{RemoteBackend, RemoteConfig};
pub use toy::{ToyBackend, ToyBackendParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub num_candidates: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.num_candidates == 0 || self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "num_candidates and max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub texts: Vec<String>,
    pub latency: Duration,
    pub backend_name: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend timed out after {0:?}")]
    BackendTimeout(Duration),
    #[error("backend protocol error: {0}")]
    BackendProtocolError(String),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("invalid parameters for backend `{backend}`: {message}")]
    InvalidParams { backend: String, message: String },
}

pub trait CandidateBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Produces exactly `request.num_candidates` texts.
    fn generate(
        &self,
        state: &NetworkState,
        request: &GenerationRequest,
    ) -> Result<GenerationResponse, BackendError>;
}

pub type BackendFactory = fn(&Value) -> Result<Box<dyn CandidateBackend>, BackendError>;

pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: BackendFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn create(&self, name: &str, params: &Value) -> Result<Box<dyn CandidateBackend>, BackendError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| BackendError::UnknownBackend(name.to_string()))?;
        factory(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(mock::NAME, |p| Ok(Box::new(MockBackend::new(parse_params(mock::NAME, p)?)?)));
        r.register(toy::NAME, |p| Ok(Box::new(ToyBackend::new(parse_params(toy::NAME, p)?)?)));
        r.register(remote::NAME, |p| Ok(Box::new(RemoteBackend::new(parse_params(remote::NAME, p)?)?)));
        r
    }
}

fn parse_params<T: DeserializeOwned>(backend: &str, params: &Value) -> Result<T, BackendError> {
    let v = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| BackendError::InvalidParams {
        backend: backend.to_string(),
        message: e.to_string(),
    })
}
