//! Simulated Points of Deployment: the deployment agent, the instance
//! backend, the cache node and ABR streaming server microservices, and the
//! origin media server.

mod abr;
mod agent;
mod backend;
mod cache;
mod instance;
pub mod manifest;
mod media;

pub use abr::AbrServer;
pub use agent::PodRuntime;
pub use backend::{
    ControlFault, InProcessBackend, InstanceBackend, LaunchRequest, RunningInstance,
    FACTORY_ABR_SERVER, FACTORY_CACHE_NODE,
};
pub use cache::{
    CacheNode, CONFIG_BOOTSTRAP_CONTENT, CONFIG_BOOTSTRAP_SOURCE, CONFIG_COMPONENT_ID,
    CONFIG_MEDIA_SERVER, REGISTRATION_ATTEMPTS,
};
pub use instance::InstanceCore;
pub use manifest::{build_manifest, AbrManifest, Representation};
pub use media::{Blob, MediaServer};
