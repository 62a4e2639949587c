//! The CDN component provider domain: component repository, microservice
//! deployer, and the component deployment manager serving the public API.

mod deployer;
mod manager;
mod repository;

use std::sync::Arc;
use std::time::Duration;

pub use deployer::{Deployment, MicroserviceDeployer};
pub use manager::{ComponentDeploymentManager, DEFAULT_PROVISION_TIMEOUT};
pub use repository::{CatalogueDocument, ComponentRepository};

use crate::trace::Tracer;
use crate::workflow::{HttpControl, Orchestrator, PlanRepository};

#[derive(Debug, Clone)]
pub struct ProviderOptions {
    pub pod_timeout: Duration,
    pub retry_backoff: Duration,
    pub provision_timeout: Duration,
}

impl Default for ProviderOptions {
    fn default() -> Self {
        ProviderOptions {
            pod_timeout: Duration::from_secs(5),
            retry_backoff: Duration::from_millis(50),
            provision_timeout: DEFAULT_PROVISION_TIMEOUT,
        }
    }
}

/// Wires repository, deployer and orchestrator into a deployment manager
/// that talks to PoDs and microservices over HTTP.
pub fn component_provider(
    repo: Arc<ComponentRepository>,
    plans: Arc<PlanRepository>,
    tracer: &Tracer,
    opts: &ProviderOptions,
) -> Arc<ComponentDeploymentManager> {
    let deployer = MicroserviceDeployer::new(repo.clone(), tracer.with_actor("deployer"))
        .with_pod_timeout(opts.pod_timeout);
    let orchestrator = Orchestrator::new(
        plans,
        Arc::new(HttpControl::new()),
        tracer.with_actor("orchestrator"),
    )
    .with_retry_backoff(opts.retry_backoff);
    Arc::new(
        ComponentDeploymentManager::new(
            repo,
            deployer,
            orchestrator,
            tracer.with_actor("component-deployment-manager"),
        )
        .with_timeout(opts.provision_timeout),
    )
}
