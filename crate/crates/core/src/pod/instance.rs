use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde_json::{json, Value};

use crate::error::Result;
use crate::model::wire::{HealthReport, StateUpdate};
use crate::model::{AccessInfo, InstanceState, PeerEntry, Region, Role};
use crate::trace::Tracer;

/// Identity, lifecycle state and peer table common to every microservice.
pub struct InstanceCore {
    pub instance_id: String,
    pub role: Role,
    pub pod_id: String,
    pub region: Region,
    pub config: BTreeMap<String, String>,
    pub tracer: Tracer,
    state: Mutex<InstanceState>,
    peers: Mutex<Vec<PeerEntry>>,
    own: Mutex<Option<(AccessInfo, AccessInfo)>>,
}

impl InstanceCore {
    pub fn new(
        instance_id: String,
        role: Role,
        pod_id: String,
        region: Region,
        config: BTreeMap<String, String>,
        tracer: Tracer,
    ) -> Self {
        InstanceCore {
            instance_id,
            role,
            pod_id,
            region,
            config,
            tracer,
            state: Mutex::new(InstanceState::Deployed),
            peers: Mutex::new(Vec::new()),
            own: Mutex::new(None),
        }
    }

    pub fn state(&self) -> InstanceState {
        *self.state.lock()
    }

    pub fn set_state(&self, next: InstanceState) -> Result<()> {
        let mut state = self.state.lock();
        if *state == next {
            return Ok(());
        }
        if !state.can_transition_to(next) {
            return Err(crate::Error::new(
                crate::ErrorCode::InvalidState,
                format!("{}: cannot move from {:?} to {next:?}", self.instance_id, *state),
            ));
        }
        *state = next;
        Ok(())
    }

    pub fn peers(&self) -> Vec<PeerEntry> {
        self.peers.lock().clone()
    }

    /// Idempotent overwrite.
    pub fn set_peers(&self, peers: Vec<PeerEntry>) {
        *self.peers.lock() = peers;
    }

    pub fn peer_with_role(&self, role: Role) -> Option<PeerEntry> {
        self.peers.lock().iter().find(|p| p.role == role).cloned()
    }

    pub fn set_own_access(&self, control: AccessInfo, data: AccessInfo) {
        *self.own.lock() = Some((control, data));
    }

    pub fn own_access(&self) -> Option<(AccessInfo, AccessInfo)> {
        self.own.lock().clone()
    }

    pub fn health(&self) -> HealthReport {
        HealthReport {
            instance_id: self.instance_id.clone(),
            role: self.role,
            state: self.state(),
            peers: self.peers(),
            contents: Vec::new(),
            registered_controller: None,
        }
    }
}

/// POST /peers and POST /state, shared by every microservice. GET /health is
/// added by each service since reports differ.
pub fn core_control_routes(core: Arc<InstanceCore>) -> Router {
    Router::new()
        .route("/peers", post(post_peers))
        .route("/state", post(post_state))
        .with_state(core)
}

pub fn basic_health_route(core: Arc<InstanceCore>) -> Router {
    Router::new()
        .route("/health", get(|State(c): State<Arc<InstanceCore>>| async move { Json(c.health()) }))
        .with_state(core)
}

async fn post_peers(
    State(core): State<Arc<InstanceCore>>,
    Json(peers): Json<Vec<PeerEntry>>,
) -> Json<Value> {
    let n = peers.len();
    core.set_peers(peers);
    Json(json!({ "ok": true, "peers": n }))
}

async fn post_state(
    State(core): State<Arc<InstanceCore>>,
    Json(update): Json<StateUpdate>,
) -> Result<Json<Value>> {
    core.set_state(update.state)?;
    Ok(Json(json!({ "ok": true })))
}
