//! Trace events, canonical action labels, and the sequence-conformance check.
//!
//! Every control-plane step that corresponds to a numbered action of the
//! provisioning (`F4.n`) or post-provisioning (`F5.n`) sequence is recorded
//! with a canonical label, so a run's trace can be compared against the
//! reference ordering. Events with other labels (per-call detail) are ignored
//! by the conformance check.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::extract::{Query, State};
use axum::routing::get;
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::model::now_ns;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Assigned by the collector on arrival.
    pub seq: u64,
    pub actor: String,
    pub action: String,
    pub t: u64,
    pub correlation_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    SelectPod,
    CatalogueRequest,
    CatalogueResponse,
    ProvisionRequest,
    DeployRequest,
    PackageFetchRequest,
    PackageFetchResponse,
    DeployOnPod,
    DeployAck,
    OrchestrateRequest,
    PlanFetchRequest,
    PlanFetchResponse,
    OrchestrateMicroservices,
    OrchestrateAck,
    ProvisionAck,
    PostDeploymentStart,
    ControllerAccessInfo,
    Registration,
    ContentPlacement,
    PlacementResponse,
    ContentPullRequest,
    ContentPullResponse,
    ReadyNotify,
}

impl Action {
    pub const PROVISIONING: [Action; 16] = [
        Action::SelectPod,
        Action::CatalogueRequest,
        Action::CatalogueResponse,
        Action::ProvisionRequest,
        Action::DeployRequest,
        Action::PackageFetchRequest,
        Action::PackageFetchResponse,
        Action::DeployOnPod,
        Action::DeployAck,
        Action::OrchestrateRequest,
        Action::PlanFetchRequest,
        Action::PlanFetchResponse,
        Action::OrchestrateMicroservices,
        Action::OrchestrateAck,
        Action::ProvisionAck,
        Action::PostDeploymentStart,
    ];

    pub const POST_PROVISIONING: [Action; 7] = [
        Action::ControllerAccessInfo,
        Action::Registration,
        Action::ContentPlacement,
        Action::PlacementResponse,
        Action::ContentPullRequest,
        Action::ContentPullResponse,
        Action::ReadyNotify,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Action::SelectPod => "F4.1-select-pod",
            Action::CatalogueRequest => "F4.2-catalogue-request",
            Action::CatalogueResponse => "F4.3-catalogue-response",
            Action::ProvisionRequest => "F4.4-provision-request",
            Action::DeployRequest => "F4.5-deploy-request",
            Action::PackageFetchRequest => "F4.6-package-fetch-request",
            Action::PackageFetchResponse => "F4.7-package-fetch-response",
            Action::DeployOnPod => "F4.8-deploy-on-pod",
            Action::DeployAck => "F4.9-deploy-ack",
            Action::OrchestrateRequest => "F4.10-orchestrate-request",
            Action::PlanFetchRequest => "F4.11-plan-fetch-request",
            Action::PlanFetchResponse => "F4.12-plan-fetch-response",
            Action::OrchestrateMicroservices => "F4.13-orchestrate-microservices",
            Action::OrchestrateAck => "F4.14-orchestrate-ack",
            Action::ProvisionAck => "F4.15-provision-ack",
            Action::PostDeploymentStart => "F4.16-post-deployment-start",
            Action::ControllerAccessInfo => "F5.1-controller-access-info",
            Action::Registration => "F5.2-registration",
            Action::ContentPlacement => "F5.3-content-placement",
            Action::PlacementResponse => "F5.4-placement-response",
            Action::ContentPullRequest => "F5.5-content-pull-request",
            Action::ContentPullResponse => "F5.6-content-pull-response",
            Action::ReadyNotify => "F5.7-ready-notify",
        }
    }
}

/// Actions F4.1 through F4.16, once each.
pub fn provisioning_actions() -> Vec<&'static str> {
    Action::PROVISIONING.iter().map(|a| a.label()).collect()
}

/// Reference ordering for one provisioning run of a component made of
/// `microservices` packages: actions F4.2..F4.15, with the per-package
/// fetch/deploy triple (F4.6, F4.7, F4.8) repeated once per package,
/// followed by F5.1..F5.7.
pub fn provisioning_reference(microservices: usize) -> Vec<&'static str> {
    let mut out = vec![
        Action::CatalogueRequest.label(),
        Action::CatalogueResponse.label(),
        Action::ProvisionRequest.label(),
        Action::DeployRequest.label(),
    ];
    for _ in 0..microservices {
        out.push(Action::PackageFetchRequest.label());
        out.push(Action::PackageFetchResponse.label());
        out.push(Action::DeployOnPod.label());
    }
    out.extend(
        [
            Action::DeployAck,
            Action::OrchestrateRequest,
            Action::PlanFetchRequest,
            Action::PlanFetchResponse,
            Action::OrchestrateMicroservices,
            Action::OrchestrateAck,
            Action::ProvisionAck,
        ]
        .iter()
        .map(|a| a.label()),
    );
    out.extend(Action::POST_PROVISIONING.iter().map(|a| a.label()));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Conformance {
    Conformant,
    Divergent {
        index: usize,
        expected: Option<String>,
        found: Option<String>,
    },
}

impl Conformance {
    pub fn is_conformant(&self) -> bool {
        matches!(self, Conformance::Conformant)
    }
}

/// Compares the subsequence of reference-labelled events in `trace` against
/// `reference`, exactly (order and multiplicity). The trace is expected to
/// hold a single correlation id and to be in collector order.
pub fn check_trace_order(trace: &[TraceEvent], reference: &[&str]) -> Conformance {
    let known: HashSet<&str> = reference.iter().copied().collect();
    let observed: Vec<&str> = trace
        .iter()
        .map(|e| e.action.as_str())
        .filter(|a| known.contains(a))
        .collect();
    for i in 0..observed.len().max(reference.len()) {
        let expected = reference.get(i).copied();
        let found = observed.get(i).copied();
        if expected != found {
            return Conformance::Divergent {
                index: i,
                expected: expected.map(str::to_string),
                found: found.map(str::to_string),
            };
        }
    }
    Conformance::Conformant
}

/// Events of one correlation id, in collector (seq) order.
pub fn events_for(trace: &[TraceEvent], correlation_id: &str) -> Vec<TraceEvent> {
    let mut out: Vec<_> = trace
        .iter()
        .filter(|e| e.correlation_id == correlation_id)
        .cloned()
        .collect();
    out.sort_by_key(|e| e.seq);
    out
}

pub fn first_time(trace: &[TraceEvent], action: Action) -> Option<u64> {
    trace
        .iter()
        .find(|e| e.action == action.label())
        .map(|e| e.t)
}

#[async_trait]
pub trait TraceSink: Send + Sync {
    async fn record(&self, event: TraceEvent);
}

/// Discards everything.
pub struct NullSink;

#[async_trait]
impl TraceSink for NullSink {
    async fn record(&self, _event: TraceEvent) {}
}

/// In-memory collector. Arrival order defines `seq`.
#[derive(Default)]
pub struct Collector {
    next_seq: AtomicU64,
    events: Mutex<Vec<TraceEvent>>,
}

impl Collector {
    pub fn new() -> Arc<Self> {
        Arc::new(Collector::default())
    }

    pub fn push(&self, mut event: TraceEvent) -> u64 {
        let mut events = self.events.lock();
        let seq = self.next_seq.fetch_add(1, Ordering::SeqCst) + 1;
        event.seq = seq;
        events.push(event);
        seq
    }

    pub fn snapshot(&self) -> Vec<TraceEvent> {
        self.events.lock().clone()
    }

    pub fn for_correlation(&self, correlation_id: &str) -> Vec<TraceEvent> {
        events_for(&self.events.lock(), correlation_id)
    }

    pub fn clear(&self) {
        self.events.lock().clear();
    }

    /// HTTP front: POST /events (one event), GET /events[?correlation_id=].
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/events", get(list_events).post(post_event))
            .with_state(self.clone())
    }
}

#[async_trait]
impl TraceSink for Collector {
    async fn record(&self, event: TraceEvent) {
        self.push(event);
    }
}

#[derive(Deserialize)]
struct EventQuery {
    correlation_id: Option<String>,
}

async fn list_events(
    State(c): State<Arc<Collector>>,
    Query(q): Query<EventQuery>,
) -> Json<Vec<TraceEvent>> {
    Json(match q.correlation_id {
        Some(id) => c.for_correlation(&id),
        None => c.snapshot(),
    })
}

async fn post_event(State(c): State<Arc<Collector>>, Json(event): Json<TraceEvent>) -> Json<u64> {
    Json(c.push(event))
}

/// Posts events to a remote collector. The post is awaited, so causally
/// ordered emissions arrive in order.
pub struct HttpSink {
    client: reqwest::Client,
    url: String,
}

impl HttpSink {
    pub fn new(collector: &crate::model::AccessInfo) -> Self {
        HttpSink {
            client: crate::http::client(),
            url: collector.url("/events"),
        }
    }
}

#[async_trait]
impl TraceSink for HttpSink {
    async fn record(&self, event: TraceEvent) {
        let res = self
            .client
            .post(&self.url)
            .timeout(Duration::from_secs(5))
            .json(&event)
            .send()
            .await;
        if let Err(e) = res.and_then(|r| r.error_for_status()) {
            tracing::warn!(action = %event.action, "trace post failed: {e}");
        }
    }
}

/// Emits events on behalf of one named actor.
#[derive(Clone)]
pub struct Tracer {
    actor: String,
    sink: Arc<dyn TraceSink>,
}

impl Tracer {
    pub fn new(actor: impl Into<String>, sink: Arc<dyn TraceSink>) -> Self {
        Tracer {
            actor: actor.into(),
            sink,
        }
    }

    pub fn null(actor: impl Into<String>) -> Self {
        Tracer::new(actor, Arc::new(NullSink))
    }

    pub fn with_actor(&self, actor: impl Into<String>) -> Self {
        Tracer {
            actor: actor.into(),
            sink: self.sink.clone(),
        }
    }

    pub fn sink(&self) -> Arc<dyn TraceSink> {
        self.sink.clone()
    }

    pub async fn emit(&self, action: Action, correlation_id: &str) {
        self.emit_label(action.label(), correlation_id, None).await;
    }

    pub async fn emit_detail(&self, label: &str, correlation_id: &str, detail: String) {
        self.emit_label(label, correlation_id, Some(detail)).await;
    }

    async fn emit_label(&self, label: &str, correlation_id: &str, detail: Option<String>) {
        self.sink
            .record(TraceEvent {
                seq: 0,
                actor: self.actor.clone(),
                action: label.to_string(),
                t: now_ns(),
                correlation_id: correlation_id.to_string(),
                detail,
            })
            .await;
    }
}
