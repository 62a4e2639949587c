use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use cdn_flyprov::harness::{emit_report, run_scenario, summary, ScenarioConfig};
use cdn_flyprov::trace::{check_trace_order, events_for, provisioning_reference, Conformance, TraceEvent};

const BASE_PORT_ENV: &str = "CDN_FLYPROV_BASE_PORT";

#[derive(Parser)]
#[command(name = "cdn-flyprov", version, about = "On-the-fly CDN surrogate provisioning harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write runs.csv, summary.txt, report.json and traces.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's run count.
        #[arg(long)]
        runs: Option<u32>,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Port of the first service; ephemeral ports when unset.
        #[arg(long, env = BASE_PORT_ENV)]
        base_port: Option<u16>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Check a recorded trace against the reference ordering.
    TraceCheck {
        #[arg(long)]
        trace: PathBuf,
        /// Microservices in the provisioned component type.
        #[arg(long, default_value_t = 2)]
        microservices: usize,
        /// Only consider events with this correlation id.
        #[arg(long)]
        correlation_id: Option<String>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("error")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().cmd {
        Cmd::Run {
            scenario,
            runs,
            seed,
            out,
            base_port,
        } => run(scenario, runs, seed, out, base_port),
        Cmd::Validate { scenario } => match ScenarioConfig::from_file(&scenario) {
            Ok(cfg) => {
                println!("OK {} ({} phases, {} runs)", cfg.name, cfg.phases.len(), cfg.runs);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid scenario {}: {e}", scenario.display());
                ExitCode::from(2)
            }
        },
        Cmd::TraceCheck {
            trace,
            microservices,
            correlation_id,
        } => trace_check(trace, microservices, correlation_id),
    }
}

fn run(scenario: PathBuf, runs: Option<u32>, seed: Option<u64>, out: PathBuf, base_port: Option<u16>) -> ExitCode {
    let mut cfg = match ScenarioConfig::from_file(&scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid scenario {}: {e}", scenario.display());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = runs {
        cfg.runs = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    let report = match rt.block_on(run_scenario(&cfg, base_port)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = emit_report(&report, &out) {
        eprintln!("writing {}: {e}", out.display());
        return ExitCode::FAILURE;
    }
    print!("{}", summary(&report));
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn trace_check(path: PathBuf, microservices: usize, correlation_id: Option<String>) -> ExitCode {
    let events: Vec<TraceEvent> = match std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(v) => v,
        Err(e) => {
            eprintln!("reading {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let events = match correlation_id {
        Some(c) => events_for(&events, &c),
        None => {
            let mut v = events;
            v.sort_by_key(|e| e.seq);
            v
        }
    };
    match check_trace_order(&events, &provisioning_reference(microservices)) {
        Conformance::Conformant => {
            println!("CONFORMANT");
            ExitCode::SUCCESS
        }
        Conformance::Divergent {
            index,
            expected,
            found,
        } => {
            println!(
                "DIVERGENT at {index}: expected {}, found {}",
                expected.as_deref().unwrap_or("end of trace"),
                found.as_deref().unwrap_or("end of trace")
            );
            ExitCode::FAILURE
        }
    }
}
