use std::sync::Arc;
use std::time::Duration;

use super::config::{FaultSpec, ScenarioConfig};
use crate::cdn::{CdnController, CdnDeploymentManager, ControllerConfig, ManagerConfig};
use crate::error::Result;
use crate::fault::{refused_endpoint, FaultEndpoint, FaultMode};
use crate::http::{loopback, serve, ServiceHandle};
use crate::model::{AccessInfo, Region};
use crate::pod::{ControlFault, InProcessBackend, MediaServer, PodRuntime};
use crate::provider::{component_provider, ComponentDeploymentManager, ComponentRepository, ProviderOptions};
use crate::trace::{Collector, HttpSink, Tracer};
use crate::workflow::PlanRepository;

// Port offsets from the base port.
const COLLECTOR: u16 = 0;
const MEDIA: u16 = 1;
const CONTROLLER: u16 = 2;
const CDN_MANAGER: u16 = 3;
const PROVIDER: u16 = 4;
const FIRST_POD: u16 = 5;

/// One run's worth of services, all on loopback.
pub struct Topology {
    pub collector: Arc<Collector>,
    pub media: Arc<MediaServer>,
    pub controller: Arc<CdnController>,
    pub controller_access: AccessInfo,
    pub manager: Arc<CdnDeploymentManager>,
    pub manager_access: AccessInfo,
    pub provider: Arc<ComponentDeploymentManager>,
    pub provider_access: AccessInfo,
    pub pods: Vec<Arc<PodRuntime>>,
    /// As advertised to the CDN deployment manager.
    pub pod_accesses: Vec<AccessInfo>,
    pub backends: Vec<Arc<InProcessBackend>>,
    fault_endpoint: Option<FaultEndpoint>,
    handles: Vec<ServiceHandle>,
}

impl Topology {
    pub async fn boot(cfg: &ScenarioConfig, base_port: Option<u16>) -> Result<Topology> {
        let mut handles = Vec::new();
        let collector = Collector::new();
        let collector_h = serve(loopback(base_port, COLLECTOR), collector.router()).await?;
        let tracer = Tracer::new("harness", Arc::new(HttpSink::new(&collector_h.access("/"))));
        handles.push(collector_h);

        let media = Arc::new(MediaServer::new(&cfg.contents)?);
        let media_h = serve(loopback(base_port, MEDIA), media.router()).await?;
        let media_access = media_h.access("/");
        handles.push(media_h);

        let mut pods = Vec::new();
        let mut backends = Vec::new();
        let mut descriptors = Vec::new();
        let mut pod_accesses = Vec::new();
        for (i, p) in cfg.pods.iter().enumerate() {
            let backend = Arc::new(InProcessBackend::new(tracer.clone()));
            let pod = Arc::new(PodRuntime::new(
                &p.pod_id,
                region_of(cfg, &p.region),
                p.capacity_total,
                backend.clone(),
                Some(media_access.clone()),
            ));
            let h = serve(loopback(base_port, FIRST_POD + i as u16), pod.router()).await?;
            let mut access = h.access("/");
            if matches!(&cfg.fault, Some(FaultSpec::PodUnreachable { pod_id }) if *pod_id == p.pod_id) {
                access = refused_endpoint().await?;
            }
            pod_accesses.push(access.clone());
            descriptors.push(pod.descriptor(access).await);
            handles.push(h);
            pods.push(pod);
            backends.push(backend);
        }

        let mut plans = PlanRepository::seeded();
        plans.override_steps(cfg.step_timeout_ms, None);
        let mut opts = ProviderOptions {
            retry_backoff: Duration::from_millis(20),
            ..Default::default()
        };
        if let Some(ms) = cfg.pod_timeout_ms {
            opts.pod_timeout = Duration::from_millis(ms);
        }
        let provider = component_provider(
            Arc::new(ComponentRepository::seeded()),
            Arc::new(plans),
            &tracer,
            &opts,
        );
        let provider_h = serve(loopback(base_port, PROVIDER), provider.router()).await?;
        let provider_access = provider_h.access("/");
        handles.push(provider_h);

        let mut ccfg = ControllerConfig::new(
            media_access.clone(),
            cfg.contents.iter().map(|c| c.content_id.clone()).collect(),
        );
        ccfg.media_server = Some(media_access);
        ccfg.placement_k = cfg.placement_k;
        let controller = Arc::new(CdnController::new(ccfg, tracer.with_actor("cdn-controller")));
        let controller_h = serve(loopback(base_port, CONTROLLER), controller.router()).await?;
        let controller_access = controller_h.access("/");
        handles.push(controller_h);

        let mut mcfg = ManagerConfig::new(provider_access.clone(), controller_access.clone(), descriptors);
        mcfg.detector = cfg.detector.clone();
        let manager = CdnDeploymentManager::new(mcfg, tracer.with_actor("cdn-deployment-manager"));
        controller.set_observer(manager.clone());
        let manager_h = serve(loopback(base_port, CDN_MANAGER), manager.router()).await?;
        let manager_access = manager_h.access("/");
        handles.push(manager_h);

        Ok(Topology {
            collector,
            media,
            controller,
            controller_access,
            manager,
            manager_access,
            provider,
            provider_access,
            pods,
            pod_accesses,
            backends,
            fault_endpoint: None,
            handles,
        })
    }

    /// Arms faults that must not affect the bootstrap surrogates.
    pub async fn arm_fault(&mut self, fault: Option<&FaultSpec>) -> Result<()> {
        match fault {
            Some(FaultSpec::ControlBlackHole { role }) => {
                for b in &self.backends {
                    b.inject_control_fault(Some(ControlFault {
                        role: *role,
                        mode: FaultMode::BlackHole,
                    }));
                }
            }
            Some(FaultSpec::ControllerDown) => {
                let ep = FaultEndpoint::start(FaultMode::Reset).await?;
                self.manager.set_controller_access(ep.access("/"));
                self.fault_endpoint = Some(ep);
            }
            Some(FaultSpec::PodUnreachable { .. }) | None => {}
        }
        Ok(())
    }

    /// Connection attempts absorbed by injected faults.
    pub fn fault_attempts(&self) -> usize {
        self.backends.iter().map(|b| b.fault_attempts()).sum::<usize>()
            + self.fault_endpoint.as_ref().map_or(0, |f| f.attempts())
    }

    pub async fn shutdown(self) {
        for pod in &self.pods {
            pod.shutdown().await;
        }
        for h in self.handles {
            h.shutdown().await;
        }
    }
}

fn region_of(cfg: &ScenarioConfig, id: &str) -> Region {
    cfg.regions
        .iter()
        .find(|r| r.matches(id))
        .cloned()
        .unwrap_or_else(|| Region::id(id))
}

