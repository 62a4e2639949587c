use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalogue::Role;
use crate::error::{Error, ErrorCode, Result};

pub const DEFAULT_RETRY_LIMIT: u32 = 3;
pub const DEFAULT_STEP_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Read the access information of the freshly deployed instances. Local.
    CollectAccessInfo,
    /// Send every target the access information of all other instances.
    DistributePeerInfo,
    /// Query each target's health and check its peer table.
    VerifyHealth,
    /// Tell each target it is now orchestrated.
    NotifyComplete,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::CollectAccessInfo => "collect-access-info",
            StepKind::DistributePeerInfo => "distribute-peer-info",
            StepKind::VerifyHealth => "verify-health",
            StepKind::NotifyComplete => "notify-complete",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_retry_limit() -> u32 {
    DEFAULT_RETRY_LIMIT
}

fn default_timeout_ms() -> u64 {
    DEFAULT_STEP_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_role: Option<Role>,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

impl WorkflowStep {
    pub fn new(kind: StepKind) -> Self {
        WorkflowStep {
            kind,
            target_role: None,
            retry_limit: DEFAULT_RETRY_LIMIT,
            timeout_ms: DEFAULT_STEP_TIMEOUT_MS,
        }
    }

    pub fn with_timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn with_retry_limit(mut self, retry_limit: u32) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    pub fn targeting(mut self, role: Role) -> Self {
        self.target_role = Some(role);
        self
    }

    pub fn applies_to(&self, role: Role) -> bool {
        self.target_role.is_none_or(|r| r == role)
    }
}

/// A pre-defined, strictly sequential wiring workflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestrationPlan {
    pub plan_id: String,
    pub steps: Vec<WorkflowStep>,
}

impl OrchestrationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.plan_id.is_empty() {
            return Err(Error::new(ErrorCode::InvalidConfig, "plan_id must be non-empty"));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.timeout_ms == 0 {
                return Err(Error::new(
                    ErrorCode::InvalidConfig,
                    format!("plan {}: step {i} has zero timeout", self.plan_id),
                ));
            }
        }
        Ok(())
    }

    /// Wiring plan for a cache node plus ABR streaming server.
    pub fn abr_wire_v1() -> Self {
        OrchestrationPlan {
            plan_id: "abr-wire-v1".into(),
            steps: vec![
                WorkflowStep::new(StepKind::CollectAccessInfo),
                WorkflowStep::new(StepKind::DistributePeerInfo),
                WorkflowStep::new(StepKind::VerifyHealth),
                WorkflowStep::new(StepKind::NotifyComplete),
            ],
        }
    }

    /// Plan for a lone cache node: nothing to wire, only health and completion.
    pub fn cache_only_v1() -> Self {
        OrchestrationPlan {
            plan_id: "cache-only-v1".into(),
            steps: vec![
                WorkflowStep::new(StepKind::CollectAccessInfo),
                WorkflowStep::new(StepKind::VerifyHealth),
                WorkflowStep::new(StepKind::NotifyComplete),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply_on_decode() {
        let step: WorkflowStep = serde_json::from_str(r#"{"kind":"verify-health"}"#).unwrap();
        assert_eq!(step.retry_limit, 3);
        assert_eq!(step.timeout_ms, 5000);
        assert!(step.target_role.is_none());
    }

    #[test]
    fn zero_timeout_rejected() {
        let plan = OrchestrationPlan {
            plan_id: "p".into(),
            steps: vec![WorkflowStep::new(StepKind::VerifyHealth).with_timeout_ms(0)],
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn role_filter() {
        let step = WorkflowStep::new(StepKind::DistributePeerInfo).targeting(Role::CacheNode);
        assert!(step.applies_to(Role::CacheNode));
        assert!(!step.applies_to(Role::AbrStreamingServer));
    }
}
