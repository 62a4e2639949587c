use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cdn::DetectorConfig;
use crate::error::{Error, ErrorCode, Result};
use crate::model::{ContentItem, Region, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodConfig {
    pub pod_id: String,
    pub region: String,
    pub capacity_total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPhase {
    pub name: String,
    pub region: String,
    /// Requests per second.
    pub rate: f64,
    pub duration_s: f64,
    /// content id -> relative weight
    pub content_mix: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pacing {
    /// Exactly `rate * duration` events, evenly spaced.
    #[default]
    Deterministic,
    /// Exponential inter-arrival times.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultSpec {
    /// The PoD's advertised endpoint refuses connections.
    PodUnreachable { pod_id: String },
    /// Control endpoints of new instances of `role` never answer.
    ControlBlackHole { role: Role },
    /// Surrogates are handed a controller endpoint that refuses connections.
    ControllerDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub regions: Vec<Region>,
    pub pods: Vec<PodConfig>,
    pub contents: Vec<ContentItem>,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Regions that get a surrogate before any load is replayed.
    #[serde(default)]
    pub bootstrap_regions: Vec<String>,
    pub phases: Vec<LoadPhase>,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pacing: Pacing,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
    #[serde(default = "default_k")]
    pub placement_k: usize,
    /// Overrides every orchestration step's timeout.
    #[serde(default)]
    pub step_timeout_ms: Option<u64>,
    #[serde(default)]
    pub pod_timeout_ms: Option<u64>,
}

fn default_runs() -> u32 {
    10
}

fn default_k() -> usize {
    10
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::new(ErrorCode::InvalidConfig, msg));
        if self.runs < 1 {
            return bad("runs must be >= 1".into());
        }
        let regions: BTreeSet<&str> = self.regions.iter().map(|r| r.id.as_str()).collect();
        let known_region = |r: &str| regions.contains(Region::id(r).id.as_str());
        let mut content_ids = BTreeSet::new();
        for c in &self.contents {
            c.validate()?;
            if !content_ids.insert(c.content_id.as_str()) {
                return bad(format!("duplicate content {}", c.content_id));
            }
        }
        let mut pod_ids = BTreeSet::new();
        for p in &self.pods {
            if !pod_ids.insert(p.pod_id.as_str()) {
                return bad(format!("duplicate pod {}", p.pod_id));
            }
            if !known_region(&p.region) {
                return bad(format!("pod {}: unknown region {}", p.pod_id, p.region));
            }
            if p.capacity_total == 0 {
                return bad(format!("pod {}: capacity_total must be > 0", p.pod_id));
            }
        }
        for r in &self.bootstrap_regions {
            if !known_region(r) {
                return bad(format!("bootstrap region {r} unknown"));
            }
        }
        for ph in &self.phases {
            if !known_region(&ph.region) {
                return bad(format!("phase {}: unknown region {}", ph.name, ph.region));
            }
            if !(ph.duration_s.is_finite() && ph.duration_s > 0.0) {
                return bad(format!("phase {}: duration must be > 0", ph.name));
            }
            if !(ph.rate.is_finite() && ph.rate >= 0.0) {
                return bad(format!("phase {}: rate must be >= 0", ph.name));
            }
            if ph.rate > 0.0 && ph.content_mix.values().all(|w| *w <= 0.0) {
                return bad(format!("phase {}: content mix has no positive weight", ph.name));
            }
            for (id, w) in &ph.content_mix {
                if !content_ids.contains(id.as_str()) {
                    return bad(format!("phase {}: content {id} not in the origin catalogue", ph.name));
                }
                if !(w.is_finite() && *w >= 0.0) {
                    return bad(format!("phase {}: weight of {id} must be >= 0", ph.name));
                }
            }
        }
        if let Some(FaultSpec::PodUnreachable { pod_id }) = &self.fault {
            if !pod_ids.contains(pod_id.as_str()) {
                return bad(format!("fault names unknown pod {pod_id}"));
            }
        }
        if !(self.detector.window_s > 0.0 && self.detector.threshold > 0.0) {
            return bad("detector window and threshold must be > 0".into());
        }
        Ok(())
    }
}
