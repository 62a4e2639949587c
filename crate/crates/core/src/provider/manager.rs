use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;

use super::deployer::MicroserviceDeployer;
use super::repository::ComponentRepository;
use crate::error::{Error, ErrorCode, Result};
use crate::http::correlation;
use crate::model::wire::{DisposeResponse, ProvisionRequest, ProvisionResponse};
use crate::model::{
    now_ns, AccessInfo, ComponentSummary, InstanceState, MicroserviceInstance, ProvisionRecord,
    ProvisionStatus, Role,
};
use crate::pod::CONFIG_COMPONENT_ID;
use crate::trace::{Action, Tracer};
use crate::workflow::Orchestrator;

pub const DEFAULT_PROVISION_TIMEOUT: Duration = Duration::from_secs(60);

struct Entry {
    record: ProvisionRecord,
    pod_access: AccessInfo,
}

/// CDN component deployment manager: serves the provider's public API and
/// drives deployment and orchestration of each order.
pub struct ComponentDeploymentManager {
    repo: Arc<ComponentRepository>,
    deployer: MicroserviceDeployer,
    orchestrator: Orchestrator,
    tracer: Tracer,
    records: Mutex<BTreeMap<String, Entry>>,
    next_id: AtomicU64,
    timeout: Duration,
}

impl ComponentDeploymentManager {
    pub fn new(
        repo: Arc<ComponentRepository>,
        deployer: MicroserviceDeployer,
        orchestrator: Orchestrator,
        tracer: Tracer,
    ) -> Self {
        ComponentDeploymentManager {
            repo,
            deployer,
            orchestrator,
            tracer,
            records: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            timeout: DEFAULT_PROVISION_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn get_catalogue(&self) -> Vec<ComponentSummary> {
        self.repo.get_catalogue()
    }

    pub fn record(&self, component_id: &str) -> Option<ProvisionRecord> {
        self.records.lock().get(component_id).map(|e| e.record.clone())
    }

    pub fn records(&self) -> Vec<ProvisionRecord> {
        self.records.lock().values().map(|e| e.record.clone()).collect()
    }

    /// Records neither disposed nor failed.
    pub fn active_records(&self) -> Vec<ProvisionRecord> {
        self.records()
            .into_iter()
            .filter(|r| !matches!(r.status, ProvisionStatus::Disposed | ProvisionStatus::Failed))
            .collect()
    }

    /// Deploys and orchestrates a component of `type_id` on the PoD at
    /// `pod_access`. Returns once the component is provisioned.
    pub async fn provision_component(
        &self,
        type_id: &str,
        pod_access: &AccessInfo,
        correlation_id: &str,
    ) -> Result<ProvisionResponse> {
        let (specs, plan_id) = self.repo.decompose(type_id)?;
        pod_access.validate()?;
        let component_id = format!("cmp-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let mut record =
            ProvisionRecord::new(component_id.clone(), type_id.to_string(), String::new(), now_ns());
        let fut = self.drive(&specs, &plan_id, pod_access, &mut record, correlation_id);
        let result = match tokio::time::timeout(self.timeout, fut).await {
            Ok(r) => r,
            Err(_) => Err(Error::new(
                ErrorCode::Timeout,
                format!("{component_id}: provisioning exceeded {:?}", self.timeout),
            )),
        };
        if let Err(e) = &result {
            let _ = record.transition(ProvisionStatus::Failed, now_ns());
            let ids: Vec<String> = match e {
                Error::DeploymentFailed { deployed, .. } => deployed.clone(),
                _ => record.instances.iter().map(|i| i.instance_id.clone()).collect(),
            };
            self.deployer.cleanup(pod_access, &ids, correlation_id).await;
            for inst in &mut record.instances {
                inst.state = InstanceState::Undeployed;
            }
        }
        let response = result.map(|_| surrogate_entry(&component_id, &record.instances));
        self.records.lock().insert(
            component_id,
            Entry {
                record,
                pod_access: pod_access.clone(),
            },
        );
        response
    }

    async fn drive(
        &self,
        specs: &[crate::model::MicroserviceSpec],
        plan_id: &str,
        pod_access: &AccessInfo,
        record: &mut ProvisionRecord,
        corr: &str,
    ) -> Result<()> {
        let mut extra = BTreeMap::new();
        extra.insert(CONFIG_COMPONENT_ID.to_string(), record.component_id.clone());
        self.tracer.emit(Action::DeployRequest, corr).await;
        let deployment = self
            .deployer
            .deploy_microservices(specs, pod_access, &extra, corr)
            .await?;
        record.pod_id = deployment.pod_id;
        record.instances = deployment.instances;
        record.transition(ProvisionStatus::Deployed, now_ns())?;

        self.tracer.emit(Action::OrchestrateRequest, corr).await;
        record.transition(ProvisionStatus::Orchestrating, now_ns())?;
        self.orchestrator.orchestrate(plan_id, record, corr).await?;
        self.tracer.emit(Action::OrchestrateAck, corr).await;
        record.transition(ProvisionStatus::Provisioned, now_ns())?;
        self.tracer.emit(Action::ProvisionAck, corr).await;
        Ok(())
    }

    /// Marks a provisioned component as registered with a CDN controller.
    pub fn mark_registered(&self, component_id: &str) -> Result<()> {
        let mut records = self.records.lock();
        let entry = records.get_mut(component_id).ok_or_else(|| not_found(component_id))?;
        entry.record.transition(ProvisionStatus::Registered, now_ns())
    }

    /// Undeploys every instance of the component.
    pub async fn dispose_component(&self, component_id: &str, correlation_id: &str) -> Result<()> {
        let (pod, ids) = {
            let records = self.records.lock();
            let entry = records
                .get(component_id)
                .filter(|e| {
                    !matches!(
                        e.record.status,
                        ProvisionStatus::Disposed | ProvisionStatus::Failed
                    )
                })
                .ok_or_else(|| not_found(component_id))?;
            let ids: Vec<String> = entry
                .record
                .instances
                .iter()
                .filter(|i| i.state != InstanceState::Undeployed)
                .map(|i| i.instance_id.clone())
                .collect();
            (entry.pod_access.clone(), ids)
        };
        for id in &ids {
            match self.deployer.undeploy(&pod, id, correlation_id).await {
                Ok(_) => {}
                Err(e) if e.code() == ErrorCode::InstanceNotFound => {}
                Err(e) => return Err(e),
            }
            if let Some(entry) = self.records.lock().get_mut(component_id) {
                if let Some(i) = entry.record.instances.iter_mut().find(|i| &i.instance_id == id) {
                    i.state = InstanceState::Undeployed;
                }
            }
        }
        let mut records = self.records.lock();
        let entry = records.get_mut(component_id).ok_or_else(|| not_found(component_id))?;
        entry.record.transition(ProvisionStatus::Disposed, now_ns())
    }

    /// GET /CDNComponentCatalogue, POST /CDNComponent/{CDNComponentTypeID},
    /// DELETE /CDNComponent/{CDNComponentID}
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/CDNComponentCatalogue", get(catalogue))
            .route("/CDNComponent/{id}", post(provision).delete(dispose))
            .with_state(self.clone())
    }
}

fn not_found(component_id: &str) -> Error {
    Error::new(
        ErrorCode::ComponentNotFound,
        format!("no active component {component_id:?}"),
    )
}

/// The surrogate's entry points: the cache node takes the registration
/// call; clients are served by the ABR server when present.
fn surrogate_entry(component_id: &str, instances: &[MicroserviceInstance]) -> ProvisionResponse {
    let by_role = |r: Role| instances.iter().find(|i| i.role == r);
    let control = by_role(Role::CacheNode).or(instances.first());
    let data = by_role(Role::AbrStreamingServer).or(control);
    ProvisionResponse {
        cdn_component_id: component_id.to_string(),
        surrogate_control: control.map(|i| i.control_access.clone()),
        surrogate_data: data.map(|i| i.data_access.clone()),
    }
}

async fn catalogue(State(m): State<Arc<ComponentDeploymentManager>>) -> Json<Vec<ComponentSummary>> {
    Json(m.get_catalogue())
}

async fn provision(
    State(m): State<Arc<ComponentDeploymentManager>>,
    headers: HeaderMap,
    Path(type_id): Path<String>,
    Json(req): Json<ProvisionRequest>,
) -> Result<Json<ProvisionResponse>> {
    let corr = correlation(&headers);
    m.provision_component(&type_id, &req.pod_access, &corr)
        .await
        .map(Json)
}

async fn dispose(
    State(m): State<Arc<ComponentDeploymentManager>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Response {
    match m.dispose_component(&id, &correlation(&headers)).await {
        Ok(()) => Json(DisposeResponse {
            success: true,
            error: None,
        })
        .into_response(),
        Err(e) => {
            let body = e.to_body();
            let status = StatusCode::from_u16(body.code.http_status())
                .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (
                status,
                Json(DisposeResponse {
                    success: false,
                    error: Some(body),
                }),
            )
                .into_response()
        }
    }
}
