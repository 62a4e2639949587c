use std::time::Duration;

use async_trait::async_trait;

use crate::error::{ErrorCode, Result};
use crate::http::{client, decode, transport_error};
use crate::model::wire::{HealthReport, StateUpdate, CORRELATION_HEADER};
use crate::model::{InstanceState, MicroserviceInstance, PeerEntry};

/// Calls the orchestrator makes on a microservice's control interface.
/// Every failure is reported as `STEP_CALL_FAILED` and is retryable.
#[async_trait]
pub trait InstanceControl: Send + Sync {
    async fn post_peers(
        &self,
        target: &MicroserviceInstance,
        peers: &[PeerEntry],
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()>;

    async fn health(
        &self,
        target: &MicroserviceInstance,
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<HealthReport>;

    async fn set_state(
        &self,
        target: &MicroserviceInstance,
        state: InstanceState,
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()>;
}

/// REST implementation: POST /peers, GET /health, POST /state.
pub struct HttpControl {
    client: reqwest::Client,
}

impl HttpControl {
    pub fn new() -> Self {
        HttpControl { client: client() }
    }
}

impl Default for HttpControl {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl InstanceControl for HttpControl {
    async fn post_peers(
        &self,
        target: &MicroserviceInstance,
        peers: &[PeerEntry],
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()> {
        let url = target.control_access.url("/peers");
        let resp = self
            .client
            .post(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(timeout)
            .json(peers)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::StepCallFailed, &url, &e))?;
        decode::<serde_json::Value>(resp)
            .await
            .map(|_| ())
            .map_err(|e| crate::Error::new(ErrorCode::StepCallFailed, e.to_string()))
    }

    async fn health(
        &self,
        target: &MicroserviceInstance,
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<HealthReport> {
        let url = target.control_access.url("/health");
        let resp = self
            .client
            .get(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(timeout)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::StepCallFailed, &url, &e))?;
        decode(resp)
            .await
            .map_err(|e| crate::Error::new(ErrorCode::StepCallFailed, e.to_string()))
    }

    async fn set_state(
        &self,
        target: &MicroserviceInstance,
        state: InstanceState,
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()> {
        let url = target.control_access.url("/state");
        let resp = self
            .client
            .post(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(timeout)
            .json(&StateUpdate { state })
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::StepCallFailed, &url, &e))?;
        decode::<serde_json::Value>(resp)
            .await
            .map(|_| ())
            .map_err(|e| crate::Error::new(ErrorCode::StepCallFailed, e.to_string()))
    }
}
