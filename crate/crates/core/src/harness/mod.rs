//! Scenario harness: boots a topology on loopback, replays synthetic load,
//! and reports latency, trace conformance and content integrity per run.

mod config;
mod load;
mod report;
mod run;
mod topology;

pub use config::{FaultSpec, LoadPhase, Pacing, PodConfig, ScenarioConfig};
pub use load::{generate_load, LoadEvent, LOAD_EPOCH_NS};
pub use report::{emit_report, summary};
pub use run::{
    measure_latencies, run_once, run_scenario, run_seed, DecisionClass, IntegrityReport,
    RedirectionStats, ReferenceFigure, ReferenceLatencies, RunReport, RunVerdict, ScenarioReport,
    SurrogateInfo, WAN_TESTBED_REFERENCE,
};
pub use topology::Topology;
