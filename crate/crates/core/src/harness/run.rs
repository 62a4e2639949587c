use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::load::generate_load;
use super::topology::Topology;
use crate::cdn::{OrderRecord, OrderStatus};
use crate::error::{Error, ErrorBody, ErrorCode, Result};
use crate::http::{client, decode, transport_error};
use crate::model::wire::CORRELATION_HEADER;
use crate::model::{
    sha256_hex, FlashCrowdTrigger, LatencyReport, LatencySample, RedirectDecision, Region, Role,
};
use crate::provider::ComponentRepository;
use crate::trace::{check_trace_order, first_time, provisioning_reference, Action, Conformance, TraceEvent};

const IDLE_TIMEOUT: Duration = Duration::from_secs(120);
const ORIGIN: &str = "origin";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFigure {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLatencies {
    pub deployment_delay: ReferenceFigure,
    pub orchestration_delay: ReferenceFigure,
    pub provisioning_delay: ReferenceFigure,
}

/// Seconds measured on a WAN testbed. Reported alongside local figures for
/// comparison only; local runs are much faster.
pub const WAN_TESTBED_REFERENCE: ReferenceLatencies = ReferenceLatencies {
    deployment_delay: ReferenceFigure { mean: 6.03, stddev: 0.22 },
    orchestration_delay: ReferenceFigure { mean: 7.97, stddev: 1.08 },
    provisioning_delay: ReferenceFigure { mean: 19.85, stddev: 1.18 },
};

/// Where the provisioning order stood when a request was redirected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionClass {
    BeforeTrigger,
    Pending,
    AfterReady,
}

impl DecisionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionClass::BeforeTrigger => "before-trigger",
            DecisionClass::Pending => "pending",
            DecisionClass::AfterReady => "after-ready",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunVerdict {
    Conformant,
    Divergent,
    /// The load never triggered an order.
    NoProvisioning,
    /// The order failed.
    Failed,
}

impl RunVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RunVerdict::Conformant => "CONFORMANT",
            RunVerdict::Divergent => "DIVERGENT",
            RunVerdict::NoProvisioning => "NO_PROVISIONING",
            RunVerdict::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateInfo {
    pub order_id: String,
    pub pod_id: String,
    pub region: String,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl IntegrityReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// region -> class -> target (surrogate id or "origin") -> count
pub type RedirectionStats = BTreeMap<String, BTreeMap<DecisionClass, BTreeMap<String, u64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: u32,
    pub seed: u64,
    pub verdict: RunVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
    pub microservices: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformance: Option<Conformance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencySample>,
    pub integrity: IntegrityReport,
    pub requests: u64,
    pub redirection: RedirectionStats,
    pub surrogates: BTreeMap<String, SurrogateInfo>,
    /// Surrogates registered at the controller besides the bootstrap ones.
    pub new_registrations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_attempts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<OrderRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    /// The provisioning order's trace. Written to its own file.
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

impl RunReport {
    pub fn conformant(&self) -> bool {
        self.verdict == RunVerdict::Conformant
    }

    /// Counts for one region and class, by target.
    pub fn decisions(&self, region: &str, class: DecisionClass) -> BTreeMap<String, u64> {
        self.redirection
            .get(region)
            .and_then(|m| m.get(&class))
            .cloned()
            .unwrap_or_default()
    }

    /// The surrogate provisioned by this run's order, if any.
    pub fn provisioned_surrogate(&self) -> Option<&str> {
        self.order.as_ref()?.component_id.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub runs: Vec<RunReport>,
    /// Over the runs that produced a latency sample.
    pub latency: LatencyReport,
    pub reference: ReferenceLatencies,
}

impl ScenarioReport {
    pub fn conformant_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.conformant()).count()
    }

    pub fn integrity_ok(&self) -> bool {
        self.runs.iter().all(|r| r.integrity.ok())
    }

    /// True iff every run is conformant and integrity held everywhere.
    pub fn passed(&self) -> bool {
        !self.runs.is_empty() && self.conformant_runs() == self.runs.len() && self.integrity_ok()
    }
}

/// Seed of run `run_id` (1-based). Depends on nothing else, so a run's
/// outcome does not change when other runs are added or removed.
pub fn run_seed(seed: u64, run_id: u32) -> u64 {
    seed.wrapping_add(u64::from(run_id) - 1)
}

/// The three delays of one provisioning trace, in seconds.
pub fn measure_latencies(trace: &[TraceEvent]) -> Result<LatencySample> {
    let at = |a: Action| {
        first_time(trace, a).ok_or_else(|| {
            Error::new(ErrorCode::IncompleteTrace, format!("trace lacks {}", a.label()))
        })
    };
    let span = |from: u64, to: u64| to.saturating_sub(from) as f64 / 1e9;
    Ok(LatencySample {
        deployment_delay: span(at(Action::DeployRequest)?, at(Action::DeployAck)?),
        orchestration_delay: span(at(Action::OrchestrateRequest)?, at(Action::OrchestrateAck)?),
        provisioning_delay: span(at(Action::ProvisionRequest)?, at(Action::Registration)?),
    })
}

pub async fn run_scenario(cfg: &ScenarioConfig, base_port: Option<u16>) -> Result<ScenarioReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for run_id in 1..=cfg.runs {
        runs.push(run_once(cfg, run_id, base_port).await?);
    }
    let samples = runs.iter().filter_map(|r| r.latency).collect();
    Ok(ScenarioReport {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        runs,
        latency: LatencyReport::from_samples(samples),
        reference: WAN_TESTBED_REFERENCE,
    })
}

/// One run on a fresh topology.
pub async fn run_once(cfg: &ScenarioConfig, run_id: u32, base_port: Option<u16>) -> Result<RunReport> {
    let mut topo = Topology::boot(cfg, base_port).await?;
    let out = drive(cfg, run_id, &mut topo).await;
    topo.shutdown().await;
    out
}

async fn drive(cfg: &ScenarioConfig, run_id: u32, topo: &mut Topology) -> Result<RunReport> {
    let http = client();
    let seed = run_seed(cfg.seed, run_id);

    let mut bootstrap = BTreeSet::new();
    for region in &cfg.bootstrap_regions {
        let trigger = FlashCrowdTrigger {
            region: Region::id(region),
            top_contents: vec![],
            window: (0, 0),
            rate: 0.0,
        };
        let resp = http
            .post(topo.manager_access.url("/triggers"))
            .header(CORRELATION_HEADER, format!("run-{run_id}-bootstrap-{region}"))
            .json(&trigger)
            .send()
            .await
            .map_err(|e| transport_error(ErrorCode::Internal, "cdn deployment manager", &e))?;
        let rec: OrderRecord = decode(resp).await?;
        bootstrap.insert(rec.order_id);
    }
    topo.manager.wait_idle(IDLE_TIMEOUT).await?;
    for id in &bootstrap {
        let rec = topo.manager.order(id).expect("submitted order");
        if rec.status != OrderStatus::Registered {
            let why = rec.error.map(|e| e.message).unwrap_or_default();
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!("bootstrap surrogate for {} failed: {why}", rec.region),
            ));
        }
    }
    topo.arm_fault(cfg.fault.as_ref()).await?;
    topo.manager.set_correlation_prefix(format!("run-{run_id}"));

    let events = generate_load(&cfg.phases, seed, cfg.pacing);
    let mut redirection = RedirectionStats::new();
    let mut requests = 0;
    for phase in 0..cfg.phases.len() {
        for ev in events.iter().filter(|e| e.phase == phase) {
            let class = classify(&topo.manager.orders(), &bootstrap);
            let t = ev.t.to_string();
            let url = url::Url::parse_with_params(
                &topo.controller_access.url("/redirect"),
                [
                    ("region", ev.region.id.as_str()),
                    ("content_id", ev.content_id.as_str()),
                    ("t_ns", t.as_str()),
                ],
            )
            .map_err(|e| Error::new(ErrorCode::Internal, e.to_string()))?;
            let resp = http
                .get(url)
                .send()
                .await
                .map_err(|e| transport_error(ErrorCode::Internal, "cdn controller", &e))?;
            let decision: RedirectDecision = decode(resp).await?;
            let target = decision.surrogate_id.unwrap_or_else(|| ORIGIN.to_string());
            *redirection
                .entry(ev.region.id.clone())
                .or_default()
                .entry(class)
                .or_default()
                .entry(target)
                .or_default() += 1;
            requests += 1;
        }
        topo.manager.wait_idle(IDLE_TIMEOUT).await?;
    }

    let orders = topo.manager.orders();
    let mut surrogates = BTreeMap::new();
    for o in orders.iter().filter(|o| o.status == OrderStatus::Registered) {
        if let (Some(c), Some(p)) = (&o.component_id, &o.pod_id) {
            surrogates.insert(
                c.clone(),
                SurrogateInfo {
                    order_id: o.order_id.clone(),
                    pod_id: p.clone(),
                    region: o.region.id.clone(),
                    bootstrap: bootstrap.contains(&o.order_id),
                },
            );
        }
    }
    let boot_components: BTreeSet<&String> = surrogates
        .iter()
        .filter(|(_, s)| s.bootstrap)
        .map(|(c, _)| c)
        .collect();
    let new_registrations = topo
        .controller
        .registrations()
        .iter()
        .filter(|r| !boot_components.contains(&r.surrogate_id))
        .count();

    let order = orders
        .iter()
        .filter(|o| !bootstrap.contains(&o.order_id))
        .min_by_key(|o| order_seq(&o.order_id))
        .cloned();
    let microservices = order
        .as_ref()
        .and_then(|o| o.type_id.as_deref())
        .and_then(|t| ComponentRepository::seeded().decompose(t).ok())
        .map_or(0, |(specs, _)| specs.len());
    let trace = order
        .as_ref()
        .map(|o| topo.collector.for_correlation(&o.correlation_id))
        .unwrap_or_default();

    let mut error = order.as_ref().and_then(|o| o.error.clone());
    let mut conformance = None;
    let mut latency = None;
    let verdict = match &order {
        None => RunVerdict::NoProvisioning,
        Some(o) if o.status != OrderStatus::Registered => RunVerdict::Failed,
        Some(_) => {
            let c = check_trace_order(&trace, &provisioning_reference(microservices));
            match measure_latencies(&trace) {
                Ok(s) => latency = Some(s),
                Err(e) => error = Some(e.to_body()),
            }
            let v = if c.is_conformant() {
                RunVerdict::Conformant
            } else {
                RunVerdict::Divergent
            };
            conformance = Some(c);
            v
        }
    };

    let integrity = check_integrity(topo, &orders).await;
    Ok(RunReport {
        run_id,
        seed,
        verdict,
        correlation_id: order.as_ref().map(|o| o.correlation_id.clone()),
        microservices,
        conformance,
        latency,
        integrity,
        requests,
        redirection,
        surrogates,
        new_registrations,
        fault_attempts: cfg.fault.as_ref().map(|_| topo.fault_attempts()),
        order,
        error,
        trace,
    })
}

fn classify(orders: &[OrderRecord], bootstrap: &BTreeSet<String>) -> DecisionClass {
    let mut own = orders.iter().filter(|o| !bootstrap.contains(&o.order_id)).peekable();
    if own.peek().is_none() {
        DecisionClass::BeforeTrigger
    } else if own.any(|o| o.status == OrderStatus::Registered) {
        DecisionClass::AfterReady
    } else {
        DecisionClass::Pending
    }
}

fn order_seq(order_id: &str) -> u64 {
    order_id
        .rsplit('-')
        .next()
        .and_then(|n| n.parse().ok())
        .unwrap_or(u64::MAX)
}

/// Fetches every placed content back from each registered surrogate's cache
/// and compares its SHA-256 with the origin copy.
async fn check_integrity(topo: &Topology, orders: &[OrderRecord]) -> IntegrityReport {
    let http = client();
    let mut report = IntegrityReport::default();
    for o in orders.iter().filter(|o| o.status == OrderStatus::Registered) {
        let (Some(component), Some(reg)) = (&o.component_id, &o.registration) else {
            continue;
        };
        let cache = topo.provider.record(component).and_then(|r| {
            r.instances
                .into_iter()
                .find(|i| i.role == Role::CacheNode)
        });
        let Some(cache) = cache else {
            report.mismatches.push(format!("{component}: no cache instance"));
            continue;
        };
        for content_id in &reg.placement.contents {
            report.checked += 1;
            let origin = match topo.media.get_content(content_id) {
                Ok(b) => b.sha256,
                Err(e) => {
                    report.mismatches.push(format!("{component}/{content_id}: {e}"));
                    continue;
                }
            };
            let url = cache.data_access.url(&format!("/contents/{content_id}"));
            let got = match http.get(url).send().await {
                Ok(r) if r.status().is_success() => r.bytes().await.ok().map(|b| sha256_hex(&b)),
                _ => None,
            };
            match got {
                Some(h) if h == origin => {}
                Some(h) => report
                    .mismatches
                    .push(format!("{component}/{content_id}: {h} != {origin}")),
                None => report
                    .mismatches
                    .push(format!("{component}/{content_id}: not served by the cache")),
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq: u64, action: Action, t: u64) -> TraceEvent {
        TraceEvent {
            seq,
            actor: "x".into(),
            action: action.label().into(),
            t,
            correlation_id: "c".into(),
            detail: None,
        }
    }

    #[test]
    fn latency_boundaries() {
        let s = 1_000_000_000;
        let trace = vec![
            ev(1, Action::ProvisionRequest, s),
            ev(2, Action::DeployRequest, 2 * s),
            ev(3, Action::DeployAck, 4 * s),
            ev(4, Action::OrchestrateRequest, 5 * s),
            ev(5, Action::OrchestrateAck, 8 * s),
            ev(6, Action::Registration, 11 * s),
        ];
        let l = measure_latencies(&trace).unwrap();
        assert_eq!(l.deployment_delay, 2.0);
        assert_eq!(l.orchestration_delay, 3.0);
        assert_eq!(l.provisioning_delay, 10.0);
        assert!(l.is_nested());
    }

    #[test]
    fn missing_boundary_is_incomplete() {
        let trace = vec![ev(1, Action::ProvisionRequest, 1), ev(2, Action::DeployRequest, 2)];
        assert_eq!(
            measure_latencies(&trace).unwrap_err().code(),
            ErrorCode::IncompleteTrace
        );
    }

    #[test]
    fn run_seed_is_per_run() {
        assert_eq!(run_seed(42, 1), 42);
        assert_eq!(run_seed(42, 3), 44);
        assert_eq!(order_seq("order-12"), 12);
    }
}
