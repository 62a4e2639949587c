use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{ReferenceFigure, ScenarioReport};
use crate::error::{Error, ErrorCode, Result};
use crate::model::DelayStats;

/// Writes runs.csv, summary.txt, report.json and one trace-run-{k}.json per
/// run into `dir`. Output is a pure function of the report.
pub fn emit_report(report: &ScenarioReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    w.write_record([
        "run_id",
        "seed",
        "verdict",
        "deployment_delay_s",
        "orchestration_delay_s",
        "provisioning_delay_s",
        "integrity",
        "requests",
        "error",
    ])
    .map_err(csv_err)?;
    for r in &report.runs {
        let d = |f: fn(&crate::model::LatencySample) -> f64| {
            r.latency.as_ref().map(|l| format!("{:.6}", f(l))).unwrap_or_default()
        };
        w.write_record([
            r.run_id.to_string(),
            r.seed.to_string(),
            r.verdict.as_str().to_string(),
            d(|l| l.deployment_delay),
            d(|l| l.orchestration_delay),
            d(|l| l.provisioning_delay),
            if r.integrity.ok() { "PASS" } else { "FAIL" }.to_string(),
            r.requests.to_string(),
            r.error.as_ref().map(|e| e.code.as_str().to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    written.push(csv_path);

    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary(report))?;
    written.push(summary_path);

    let json_path = dir.join("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    written.push(json_path);

    for r in &report.runs {
        let p = dir.join(format!("trace-run-{}.json", r.run_id));
        std::fs::write(&p, serde_json::to_string_pretty(&r.trace)? + "\n")?;
        written.push(p);
    }
    Ok(written)
}

fn csv_err(e: csv::Error) -> Error {
    Error::new(ErrorCode::Io, e.to_string())
}

pub fn summary(report: &ScenarioReport) -> String {
    let mut s = String::new();
    let n = report.runs.len();
    let _ = writeln!(s, "scenario: {}", report.scenario);
    let _ = writeln!(s, "seed: {}", report.seed);
    let _ = writeln!(s, "runs: {n}");
    let _ = writeln!(s, "conformant: {}/{n}", report.conformant_runs());
    let _ = writeln!(
        s,
        "integrity: {}",
        if report.integrity_ok() { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(s, "result: {}", if report.passed() { "PASS" } else { "FAIL" });
    let _ = writeln!(s);
    let samples = report.latency.samples.len();
    let _ = writeln!(s, "latency over {samples} runs (seconds)");
    let _ = writeln!(
        s,
        "{:<22}{:>12}{:>12}{:>14}{:>12}",
        "", "mean", "stddev", "wan mean", "wan stddev"
    );
    let row = |s: &mut String, name: &str, d: &DelayStats, r: &ReferenceFigure| {
        let _ = writeln!(
            s,
            "{name:<22}{:>12.6}{:>12.6}{:>14.2}{:>12.2}",
            d.mean, d.stddev, r.mean, r.stddev
        );
    };
    row(&mut s, "deployment_delay", &report.latency.deployment_delay, &report.reference.deployment_delay);
    row(
        &mut s,
        "orchestration_delay",
        &report.latency.orchestration_delay,
        &report.reference.orchestration_delay,
    );
    row(
        &mut s,
        "provisioning_delay",
        &report.latency.provisioning_delay,
        &report.reference.provisioning_delay,
    );
    let _ = writeln!(s);
    for r in &report.runs {
        let _ = write!(s, "run {}: {}", r.run_id, r.verdict.as_str());
        if let Some(e) = &r.error {
            let _ = write!(s, " ({}: {})", e.code, e.message);
        }
        let _ = writeln!(s);
    }
    s
}
