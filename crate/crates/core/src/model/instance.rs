use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::access::AccessInfo;
use super::catalogue::Role;
use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceState {
    Deployed,
    Orchestrated,
    Failed,
    Undeployed,
}

impl InstanceState {
    pub fn can_transition_to(self, next: InstanceState) -> bool {
        use InstanceState::*;
        matches!(
            (self, next),
            (Deployed, Orchestrated) | (Deployed, Failed) | (Orchestrated, Failed) | (_, Undeployed)
        )
    }
}

/// A live (or formerly live) microservice on a PoD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroserviceInstance {
    pub instance_id: String,
    pub role: Role,
    pub control_access: AccessInfo,
    pub data_access: AccessInfo,
    pub pod_id: String,
    pub state: InstanceState,
}

impl MicroserviceInstance {
    pub fn transition(&mut self, next: InstanceState) -> Result<()> {
        if !self.state.can_transition_to(next) {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!(
                    "instance {}: illegal transition {:?} -> {next:?}",
                    self.instance_id, self.state
                ),
            ));
        }
        self.state = next;
        Ok(())
    }

    /// The access information peers exchange during orchestration.
    pub fn peer_entry(&self) -> PeerEntry {
        PeerEntry {
            instance_id: self.instance_id.clone(),
            role: self.role,
            control_access: self.control_access.clone(),
            data_access: self.data_access.clone(),
        }
    }
}

/// One row of a microservice's peer table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeerEntry {
    pub instance_id: String,
    pub role: Role,
    pub control_access: AccessInfo,
    pub data_access: AccessInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvisionStatus {
    Deploying,
    Deployed,
    Orchestrating,
    Provisioned,
    Registered,
    Disposed,
    Failed,
}

impl ProvisionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProvisionStatus::Deploying => "deploying",
            ProvisionStatus::Deployed => "deployed",
            ProvisionStatus::Orchestrating => "orchestrating",
            ProvisionStatus::Provisioned => "provisioned",
            ProvisionStatus::Registered => "registered",
            ProvisionStatus::Disposed => "disposed",
            ProvisionStatus::Failed => "failed",
        }
    }

    pub fn can_transition_to(self, next: ProvisionStatus) -> bool {
        use ProvisionStatus::*;
        matches!(
            (self, next),
            (Deploying, Deployed)
                | (Deployed, Orchestrating)
                | (Orchestrating, Provisioned)
                | (Provisioned, Registered)
                | (Provisioned, Disposed)
                | (Registered, Disposed)
                | (Failed, Disposed)
                | (Deploying | Deployed | Orchestrating | Provisioned | Registered, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, ProvisionStatus::Disposed | ProvisionStatus::Failed)
    }
}

impl fmt::Display for ProvisionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lifecycle of one provisioned component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisionRecord {
    pub component_id: String,
    pub type_id: String,
    pub pod_id: String,
    pub instances: Vec<MicroserviceInstance>,
    pub status: ProvisionStatus,
    /// status name -> monotonic ns at which the status was entered
    pub timestamps: BTreeMap<String, u64>,
}

impl ProvisionRecord {
    pub fn new(component_id: String, type_id: String, pod_id: String, t_ns: u64) -> Self {
        let mut timestamps = BTreeMap::new();
        timestamps.insert(ProvisionStatus::Deploying.as_str().to_string(), t_ns);
        ProvisionRecord {
            component_id,
            type_id,
            pod_id,
            instances: Vec::new(),
            status: ProvisionStatus::Deploying,
            timestamps,
        }
    }

    pub fn transition(&mut self, next: ProvisionStatus, t_ns: u64) -> Result<()> {
        if !self.status.can_transition_to(next) {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!(
                    "component {}: illegal transition {} -> {next}",
                    self.component_id, self.status
                ),
            ));
        }
        if next == ProvisionStatus::Provisioned
            && self
                .instances
                .iter()
                .any(|i| i.state != InstanceState::Orchestrated)
        {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!(
                    "component {}: provisioned requires every instance orchestrated",
                    self.component_id
                ),
            ));
        }
        let last = self.timestamps.values().copied().max().unwrap_or(0);
        self.timestamps
            .insert(next.as_str().to_string(), t_ns.max(last));
        self.status = next;
        Ok(())
    }
}
