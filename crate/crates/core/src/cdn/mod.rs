//! The CDN provider domain: flash-crowd detection, PoD selection, the CDN
//! deployment manager and the CDN controller.

mod controller;
mod detector;
mod manager;
mod select;
mod strategy;

pub use controller::{CdnController, ControllerConfig, RequestObserver};
pub use detector::{rank, DetectorConfig, FlashCrowdDetector, Suppression};
pub use manager::{CdnDeploymentManager, ManagerConfig, OrderRecord, OrderStatus};
pub use select::{score, select_pod, REGION_WEIGHT};
pub use strategy::{Candidate, NearestLeastLoaded, PlacementStrategy, RedirectStrategy, TopKPlacement};
