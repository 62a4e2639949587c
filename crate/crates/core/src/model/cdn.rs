use serde::{Deserialize, Serialize};

use super::access::{AccessInfo, Region};

/// One end-user request as seen by the CDN controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestEvent {
    pub region: Region,
    pub content_id: String,
    /// Event time, monotonic ns.
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentCount {
    pub content_id: String,
    pub request_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashCrowdTrigger {
    pub region: Region,
    /// Sorted by count descending, ties by content id ascending.
    pub top_contents: Vec<ContentCount>,
    /// (start, end) of the detection window, monotonic ns.
    pub window: (u64, u64),
    /// Requests per second over the window.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateRegistration {
    pub surrogate_id: String,
    pub region: Region,
    pub control_access: AccessInfo,
    pub data_access: AccessInfo,
    #[serde(default)]
    pub ready: bool,
}

impl SurrogateRegistration {
    /// Same identity and endpoints; readiness is controller-owned and ignored.
    pub fn same_as(&self, other: &SurrogateRegistration) -> bool {
        self.surrogate_id == other.surrogate_id
            && self.region == other.region
            && self.control_access == other.control_access
            && self.data_access == other.data_access
    }
}

/// Body of the readiness notification: what the surrogate actually holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadyReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contents: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Surrogate,
    Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectDecision {
    pub target: AccessInfo,
    pub target_kind: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_id: Option<String>,
}
