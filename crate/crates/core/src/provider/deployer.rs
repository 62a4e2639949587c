use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, ErrorCode, Result};
use crate::http::{client, decode, transport_error};
use crate::model::wire::{DeploymentRequest, PodStatus, CORRELATION_HEADER};
use crate::model::{AccessInfo, MicroserviceInstance, MicroserviceSpec};
use crate::trace::{Action, Tracer};

use super::repository::ComponentRepository;

#[derive(Debug, Clone)]
pub struct Deployment {
    pub pod_id: String,
    pub instances: Vec<MicroserviceInstance>,
}

/// Microservice deployer: fetches packages from the component repository
/// and deploys them through a PoD's deployment agent.
pub struct MicroserviceDeployer {
    repo: Arc<ComponentRepository>,
    client: reqwest::Client,
    tracer: Tracer,
    pod_timeout: Duration,
}

impl MicroserviceDeployer {
    pub fn new(repo: Arc<ComponentRepository>, tracer: Tracer) -> Self {
        MicroserviceDeployer {
            repo,
            client: client(),
            tracer,
            pod_timeout: Duration::from_secs(5),
        }
    }

    pub fn with_pod_timeout(mut self, timeout: Duration) -> Self {
        self.pod_timeout = timeout;
        self
    }

    pub async fn pod_status(&self, pod: &AccessInfo, correlation_id: &str) -> Result<PodStatus> {
        let url = pod.url("/deployments");
        let resp = self
            .client
            .get(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(self.pod_timeout)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::PodUnreachable, &url, &e))?;
        decode(resp).await
    }

    /// Deploys one instance per spec, sequentially in spec order. `extra`
    /// config is merged into every spec's config. On a failure after some
    /// instances are up, the error lists them; the caller cleans up.
    pub async fn deploy_microservices(
        &self,
        specs: &[MicroserviceSpec],
        pod: &AccessInfo,
        extra: &BTreeMap<String, String>,
        correlation_id: &str,
    ) -> Result<Deployment> {
        if specs.is_empty() {
            return Ok(Deployment {
                pod_id: String::new(),
                instances: Vec::new(),
            });
        }
        let status = self.pod_status(pod, correlation_id).await?;
        let mut instances: Vec<MicroserviceInstance> = Vec::new();
        let fail = |instances: &[MicroserviceInstance], e: Error| -> Error {
            if instances.is_empty() {
                e
            } else {
                Error::DeploymentFailed {
                    reason: e.to_string(),
                    deployed: instances.iter().map(|i| i.instance_id.clone()).collect(),
                }
            }
        };
        for spec in specs {
            self.tracer.emit(Action::PackageFetchRequest, correlation_id).await;
            let package = match self.repo.fetch_package(&spec.package_id) {
                Ok(p) => p,
                Err(e) => return Err(fail(&instances, e)),
            };
            self.tracer.emit(Action::PackageFetchResponse, correlation_id).await;
            let mut config = spec.config.clone();
            config.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
            self.tracer.emit(Action::DeployOnPod, correlation_id).await;
            let req = DeploymentRequest {
                package,
                config,
                correlation_id: correlation_id.to_string(),
            };
            match self.deploy_one(pod, &req).await {
                Ok(i) => instances.push(i),
                Err(e) => return Err(fail(&instances, e)),
            }
        }
        self.tracer.emit(Action::DeployAck, correlation_id).await;
        Ok(Deployment {
            pod_id: status.pod_id,
            instances,
        })
    }

    async fn deploy_one(&self, pod: &AccessInfo, req: &DeploymentRequest) -> Result<MicroserviceInstance> {
        let url = pod.url("/deployments");
        let resp = self
            .client
            .post(&url)
            .header(CORRELATION_HEADER, &req.correlation_id)
            .timeout(self.pod_timeout * 4)
            .json(req)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::PodUnreachable, &url, &e))?;
        decode(resp).await
    }

    pub async fn undeploy(
        &self,
        pod: &AccessInfo,
        instance_id: &str,
        correlation_id: &str,
    ) -> Result<MicroserviceInstance> {
        let url = pod.url(&format!("/deployments/{instance_id}"));
        let resp = self
            .client
            .delete(&url)
            .header(CORRELATION_HEADER, correlation_id)
            .timeout(self.pod_timeout)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::PodUnreachable, &url, &e))?;
        decode(resp).await
    }

    /// Best-effort removal of partially deployed instances.
    pub async fn cleanup(&self, pod: &AccessInfo, instance_ids: &[String], correlation_id: &str) {
        for id in instance_ids {
            if let Err(e) = self.undeploy(pod, id, correlation_id).await {
                tracing::warn!(instance = %id, "cleanup failed: {e}");
            }
        }
    }
}
