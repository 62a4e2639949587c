//! Request and response bodies of the REST interfaces that carry more than a
//! single domain object.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::access::{AccessInfo, Region};
use super::catalogue::{MicroservicePackage, Role};
use super::instance::{InstanceState, MicroserviceInstance, PeerEntry};

pub const CORRELATION_HEADER: &str = "x-correlation-id";
pub const CONTENT_SHA256_HEADER: &str = "x-content-sha256";
pub const CONTENT_DURATION_HEADER: &str = "x-content-duration";

/// POST /CDNComponent/{CDNComponentTypeID}
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisionRequest {
    pub pod_access: AccessInfo,
}

/// Response of POST /CDNComponent/{CDNComponentTypeID}. Besides the component
/// id, the acknowledgment names the surrogate's entry-point microservice so the
/// CDN side can start post-deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisionResponse {
    pub cdn_component_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_control: Option<AccessInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_data: Option<AccessInfo>,
}

/// Response of DELETE /CDNComponent/{CDNComponentID}
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisposeResponse {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<crate::error::ErrorBody>,
}

/// Body of POST /deployments on a PoD agent
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentRequest {
    pub package: MicroservicePackage,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
    pub correlation_id: String,
}

/// GET /deployments
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodStatus {
    pub pod_id: String,
    pub region: Region,
    pub capacity_total: u32,
    pub capacity_free: u32,
    pub instances: Vec<MicroserviceInstance>,
}

/// Microservice control: GET /health
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthReport {
    pub instance_id: String,
    pub role: Role,
    pub state: InstanceState,
    pub peers: Vec<PeerEntry>,
    #[serde(default)]
    pub contents: Vec<StoredContent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_controller: Option<AccessInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredContent {
    pub content_id: String,
    pub size_bytes: u64,
    pub sha256: String,
}

/// Microservice control: POST /state
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub state: InstanceState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PullOutcome {
    Fetched,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullEntry {
    pub content_id: String,
    pub outcome: PullOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullReport {
    pub entries: Vec<PullEntry>,
}

impl PullReport {
    pub fn fetched(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.outcome == PullOutcome::Fetched)
            .map(|e| e.content_id.as_str())
    }
}

/// Response of POST /register-with: the outcome of the
/// surrogate's registration, content pull and readiness notification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationOutcome {
    pub surrogate_id: String,
    pub placement: super::content::ContentPlacement,
    pub pull: PullReport,
    pub ready: bool,
}
