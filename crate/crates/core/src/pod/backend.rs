use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;
use parking_lot::Mutex;

use super::abr::AbrServer;
use super::cache::CacheNode;
use super::instance::InstanceCore;
use crate::error::{Error, ErrorCode, Result};
use crate::fault::{FaultEndpoint, FaultMode};
use crate::http::{loopback, mount, serve, ServiceHandle};
use crate::model::{
    AccessInfo, InstanceState, LaunchSpec, MicroserviceInstance, MicroservicePackage, Region, Role,
};
use crate::trace::Tracer;

pub const FACTORY_CACHE_NODE: &str = "cache-node";
pub const FACTORY_ABR_SERVER: &str = "abr-streaming-server";

/// Everything a backend needs to start one instance.
pub struct LaunchRequest {
    pub instance_id: String,
    pub package: MicroservicePackage,
    pub config: BTreeMap<String, String>,
    pub pod_id: String,
    pub region: Region,
}

/// A started instance; `stop` closes all of its endpoints.
#[async_trait]
pub trait RunningInstance: Send + Sync {
    fn instance(&self) -> MicroserviceInstance;
    fn set_state(&self, state: InstanceState);
    async fn stop(self: Box<Self>);
}

/// Starts microservice instances from packages.
#[async_trait]
pub trait InstanceBackend: Send + Sync {
    async fn start(&self, req: LaunchRequest) -> Result<Box<dyn RunningInstance>>;
}

/// Replace the control endpoint of every new instance of `role` with a
/// misbehaving one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlFault {
    pub role: Role,
    pub mode: FaultMode,
}

/// Runs instances as services inside this process, each with its own
/// control and data listener on a fresh loopback port.
pub struct InProcessBackend {
    tracer: Tracer,
    fault: Mutex<Option<ControlFault>>,
    endpoints: Mutex<Vec<Arc<FaultEndpoint>>>,
}

impl InProcessBackend {
    pub fn new(tracer: Tracer) -> Self {
        InProcessBackend {
            tracer,
            fault: Mutex::new(None),
            endpoints: Mutex::new(Vec::new()),
        }
    }

    pub fn inject_control_fault(&self, fault: Option<ControlFault>) {
        *self.fault.lock() = fault;
    }

    /// Connection attempts received by every fault endpoint created so far.
    pub fn fault_attempts(&self) -> usize {
        self.endpoints.lock().iter().map(|e| e.attempts()).sum()
    }
}

struct InProcessInstance {
    core: Arc<InstanceCore>,
    control: AccessInfo,
    data: AccessInfo,
    handles: Vec<ServiceHandle>,
    _fault: Option<Arc<FaultEndpoint>>,
}

#[async_trait]
impl RunningInstance for InProcessInstance {
    fn instance(&self) -> MicroserviceInstance {
        MicroserviceInstance {
            instance_id: self.core.instance_id.clone(),
            role: self.core.role,
            control_access: self.control.clone(),
            data_access: self.data.clone(),
            pod_id: self.core.pod_id.clone(),
            state: self.core.state(),
        }
    }

    fn set_state(&self, state: InstanceState) {
        let _ = self.core.set_state(state);
    }

    async fn stop(self: Box<Self>) {
        let _ = self.core.set_state(InstanceState::Undeployed);
        for h in self.handles {
            h.shutdown().await;
        }
    }
}

#[async_trait]
impl InstanceBackend for InProcessBackend {
    async fn start(&self, req: LaunchRequest) -> Result<Box<dyn RunningInstance>> {
        let factory = match &req.package.launch_spec {
            LaunchSpec::Factory { name } => name.as_str(),
            LaunchSpec::Image { reference } => {
                return Err(Error::new(
                    ErrorCode::PackageNotFound,
                    format!("image {reference:?}: no container runtime in the in-process backend"),
                ))
            }
        };
        let core = Arc::new(InstanceCore::new(
            req.instance_id.clone(),
            req.package.role,
            req.pod_id.clone(),
            req.region.clone(),
            req.config.clone(),
            self.tracer.with_actor(format!("ms:{}", req.instance_id)),
        ));
        let spec = &req.package.endpoint_spec;
        let (cache, control_router, data_router) = match factory {
            FACTORY_CACHE_NODE => {
                let node = Arc::new(CacheNode::new(core.clone()));
                let (c, d) = (node.control_router(), node.data_router());
                (Some(node), c, d)
            }
            FACTORY_ABR_SERVER => {
                let abr = Arc::new(AbrServer::new(core.clone()));
                let (c, d) = (abr.control_router(), abr.data_router());
                (None, c, d)
            }
            other => {
                return Err(Error::new(
                    ErrorCode::PackageNotFound,
                    format!("package {}: unknown factory {other:?}", req.package.package_id),
                ))
            }
        };
        let control_handle = serve(loopback(None, 0), mount(&spec.control_path, control_router)).await?;
        let data_handle = serve(loopback(None, 0), mount(&spec.data_path, data_router)).await?;
        let real_control = control_handle.access(&spec.control_path);
        let data = data_handle.access(&spec.data_path);
        core.set_own_access(real_control.clone(), data.clone());

        let fault = *self.fault.lock();
        let (control, fault_ep) = match fault {
            Some(f) if f.role == req.package.role => {
                let ep = Arc::new(FaultEndpoint::start(f.mode).await?);
                self.endpoints.lock().push(ep.clone());
                (ep.access(&spec.control_path), Some(ep))
            }
            _ => (real_control, None),
        };

        if let Some(node) = &cache {
            if let Err(e) = node.bootstrap().await {
                tracing::warn!(instance = %req.instance_id, "bootstrap pull failed: {e}");
            }
        }

        Ok(Box::new(InProcessInstance {
            core,
            control,
            data,
            handles: vec![control_handle, data_handle],
            _fault: fault_ep,
        }))
    }
}
