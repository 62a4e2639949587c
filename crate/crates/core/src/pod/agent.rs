use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::routing::{delete, get};
use axum::{Json, Router};
use tokio::sync::Mutex;

use super::backend::{InstanceBackend, LaunchRequest, RunningInstance};
use super::cache::CONFIG_MEDIA_SERVER;
use crate::error::{Error, ErrorCode, Result};
use crate::model::wire::{DeploymentRequest, PodStatus};
use crate::model::{AccessInfo, InstanceState, MicroserviceInstance, PoDDescriptor, Region};

struct PodState {
    next_seq: u64,
    running: BTreeMap<String, Box<dyn RunningInstance>>,
}

/// Deployment agent of one Point of Deployment. Deploy and undeploy are
/// serialized.
pub struct PodRuntime {
    pub pod_id: String,
    pub region: Region,
    pub capacity_total: u32,
    backend: Arc<dyn InstanceBackend>,
    media_server: Option<AccessInfo>,
    state: Mutex<PodState>,
}

impl PodRuntime {
    pub fn new(
        pod_id: impl Into<String>,
        region: Region,
        capacity_total: u32,
        backend: Arc<dyn InstanceBackend>,
        media_server: Option<AccessInfo>,
    ) -> Self {
        PodRuntime {
            pod_id: pod_id.into(),
            region,
            capacity_total,
            backend,
            media_server,
            state: Mutex::new(PodState {
                next_seq: 1,
                running: BTreeMap::new(),
            }),
        }
    }

    pub async fn deploy_package(&self, req: DeploymentRequest) -> Result<MicroserviceInstance> {
        req.package.validate()?;
        let mut state = self.state.lock().await;
        if state.running.len() as u32 >= self.capacity_total {
            return Err(Error::new(
                ErrorCode::CapacityExhausted,
                format!("pod {}: no free capacity", self.pod_id),
            ));
        }
        let instance_id = format!("{}-{}", self.pod_id, state.next_seq);
        let mut config = req.config;
        if let Some(m) = &self.media_server {
            config
                .entry(CONFIG_MEDIA_SERVER.to_string())
                .or_insert_with(|| m.endpoint.clone());
        }
        let running = self
            .backend
            .start(LaunchRequest {
                instance_id: instance_id.clone(),
                package: req.package,
                config,
                pod_id: self.pod_id.clone(),
                region: self.region.clone(),
            })
            .await?;
        state.next_seq += 1;
        let instance = running.instance();
        state.running.insert(instance_id, running);
        Ok(instance)
    }

    pub async fn undeploy(&self, instance_id: &str) -> Result<MicroserviceInstance> {
        let mut state = self.state.lock().await;
        let running = state.running.remove(instance_id).ok_or_else(|| {
            Error::new(
                ErrorCode::InstanceNotFound,
                format!("pod {}: no instance {instance_id:?}", self.pod_id),
            )
        })?;
        let mut instance = running.instance();
        running.stop().await;
        instance.state = InstanceState::Undeployed;
        Ok(instance)
    }

    pub async fn status(&self) -> PodStatus {
        let state = self.state.lock().await;
        let live = state.running.len() as u32;
        PodStatus {
            pod_id: self.pod_id.clone(),
            region: self.region.clone(),
            capacity_total: self.capacity_total,
            capacity_free: self.capacity_total.saturating_sub(live),
            instances: state.running.values().map(|r| r.instance()).collect(),
        }
    }

    pub async fn descriptor(&self, access: AccessInfo) -> PoDDescriptor {
        let s = self.status().await;
        PoDDescriptor {
            pod_id: s.pod_id,
            region: s.region,
            capacity_total: s.capacity_total,
            capacity_free: s.capacity_free,
            access,
        }
    }

    /// Stops every instance.
    pub async fn shutdown(&self) {
        let mut state = self.state.lock().await;
        let running = std::mem::take(&mut state.running);
        for (_, r) in running {
            r.stop().await;
        }
    }

    /// POST /deployments, GET /deployments, DELETE /deployments/{instance_id}
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/deployments", get(list).post(deploy))
            .route("/deployments/{instance_id}", delete(undeploy))
            .with_state(self.clone())
    }
}

async fn deploy(
    State(p): State<Arc<PodRuntime>>,
    Json(req): Json<DeploymentRequest>,
) -> Result<Json<MicroserviceInstance>> {
    p.deploy_package(req).await.map(Json)
}

async fn undeploy(
    State(p): State<Arc<PodRuntime>>,
    Path(id): Path<String>,
) -> Result<Json<MicroserviceInstance>> {
    p.undeploy(&id).await.map(Json)
}

async fn list(State(p): State<Arc<PodRuntime>>) -> Json<PodStatus> {
    Json(p.status().await)
}
