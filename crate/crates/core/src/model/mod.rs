//! Domain types shared by every service, and the JSON wire schemas built on
//! them. Field names on the wire are the snake_case field names below.

mod access;
mod catalogue;
mod cdn;
mod content;
mod instance;
mod latency;
mod plan;
pub mod wire;

use std::sync::OnceLock;
use std::time::Instant;

pub use access::{AccessInfo, PoDDescriptor, Region};
pub use catalogue::{
    validate_catalogue, CatalogueIssue, CdnComponentType, ComponentSummary, EndpointSpec,
    LaunchSpec, MicroservicePackage, MicroserviceSpec, Role,
};
pub use cdn::{
    ContentCount, FlashCrowdTrigger, ReadyReport, RedirectDecision, RequestEvent,
    SurrogateRegistration, TargetKind,
};
pub use content::{content_blob, sha256_hex, ContentItem, ContentPlacement};
pub use instance::{
    InstanceState, MicroserviceInstance, PeerEntry, ProvisionRecord, ProvisionStatus,
};
pub use latency::{DelayStats, LatencyReport, LatencySample};
pub use plan::{
    OrchestrationPlan, StepKind, WorkflowStep, DEFAULT_RETRY_LIMIT, DEFAULT_STEP_TIMEOUT_MS,
};

static EPOCH: OnceLock<Instant> = OnceLock::new();

/// Monotonic nanoseconds since the first call in this process.
pub fn now_ns() -> u64 {
    let epoch = *EPOCH.get_or_init(Instant::now);
    epoch.elapsed().as_nanos() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_is_monotone() {
        let a = now_ns();
        let b = now_ns();
        assert!(b >= a);
    }
}
