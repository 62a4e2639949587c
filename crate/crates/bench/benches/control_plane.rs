use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use cdn_flyprov::cdn::{select_pod, CdnController, ControllerConfig, DetectorConfig, FlashCrowdDetector};
use cdn_flyprov::harness::{generate_load, LoadPhase, Pacing};
use cdn_flyprov::model::{
    content_blob, AccessInfo, ContentItem, PoDDescriptor, ReadyReport, Region, RequestEvent,
    SurrogateRegistration,
};
use cdn_flyprov::pod::build_manifest;
use cdn_flyprov::trace::{check_trace_order, provisioning_reference, TraceEvent, Tracer};

fn pods(n: usize) -> Vec<PoDDescriptor> {
    (0..n)
        .map(|i| PoDDescriptor {
            pod_id: format!("pod-{i:03}"),
            region: Region::id(format!("r{}", i % 7)),
            capacity_total: 8,
            capacity_free: (i % 9) as u32,
            access: AccessInfo::new(format!("http://127.0.0.1:{}/", 20000 + i)),
        })
        .collect()
}

fn bench_select(c: &mut Criterion) {
    let p = pods(200);
    let target = Region::id("r3");
    c.bench_function("select_pod/200", |b| {
        b.iter(|| select_pod(black_box(&p), &target, 2).unwrap())
    });
}

fn bench_detector(c: &mut Criterion) {
    let region = Region::id("quebec");
    c.bench_function("detector/observe_10k", |b| {
        b.iter_batched(
            || FlashCrowdDetector::new(DetectorConfig::default()),
            |mut d| {
                for i in 0..10_000u64 {
                    let ev = RequestEvent {
                        region: region.clone(),
                        content_id: format!("c{}", i % 5),
                        t: i * 20_000_000,
                    };
                    black_box(d.observe(&ev));
                }
            },
            BatchSize::LargeInput,
        )
    });
}

fn bench_redirect(c: &mut Criterion) {
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let origin = AccessInfo::new("http://127.0.0.1:9/");
    let ctrl = CdnController::new(
        ControllerConfig::new(origin, vec!["c0".into(), "c1".into()]),
        Tracer::null("bench"),
    );
    rt.block_on(async {
        for i in 0..8 {
            let id = format!("s{i}");
            let reg = SurrogateRegistration {
                surrogate_id: id.clone(),
                region: Region::id(format!("r{}", i % 4)),
                control_access: AccessInfo::new(format!("http://127.0.0.1:{}/c", 30000 + i)),
                data_access: AccessInfo::new(format!("http://127.0.0.1:{}/d", 30000 + i)),
                ready: false,
            };
            ctrl.register_surrogate(reg, "bench").await.unwrap();
            ctrl.notify_ready(&id, ReadyReport::default(), "bench").await.unwrap();
        }
    });
    let region = Region::id("r2");
    let mut t = 0u64;
    c.bench_function("redirect_request/8_surrogates", |b| {
        b.iter(|| {
            t += 1_000_000;
            black_box(ctrl.redirect_request(&region, "c1", Some(t)))
        })
    });
}

fn bench_content(c: &mut Criterion) {
    let item = ContentItem {
        content_id: "c".into(),
        size_bytes: 1 << 20,
        duration_s: 60.0,
        blob_seed: 9,
    };
    c.bench_function("content_blob/1MiB", |b| b.iter(|| content_blob(black_box(&item)).unwrap()));
    c.bench_function("build_manifest/3_reps", |b| {
        b.iter(|| build_manifest("c", 600.0, 4.0, &[400_000, 1_200_000, 3_000_000]).unwrap())
    });
}

fn bench_trace(c: &mut Criterion) {
    let reference = provisioning_reference(2);
    let trace: Vec<TraceEvent> = reference
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            [l.to_string(), "call".to_string()].map(|a| TraceEvent {
                seq: i as u64,
                actor: "x".into(),
                action: a,
                t: i as u64,
                correlation_id: "run-1".into(),
                detail: None,
            })
        })
        .collect();
    c.bench_function("check_trace_order/2_microservices", |b| {
        b.iter(|| check_trace_order(black_box(&trace), &reference))
    });
}

fn bench_load(c: &mut Criterion) {
    let mut mix = BTreeMap::new();
    mix.insert("a".to_string(), 3.0);
    mix.insert("b".to_string(), 1.0);
    let phases = [LoadPhase {
        name: "burst".into(),
        region: "quebec".into(),
        rate: 1000.0,
        duration_s: 10.0,
        content_mix: mix,
    }];
    c.bench_function("generate_load/10k", |b| {
        b.iter(|| generate_load(black_box(&phases), 1, Pacing::Deterministic))
    });
}

criterion_group!(
    benches,
    bench_select,
    bench_detector,
    bench_redirect,
    bench_content,
    bench_trace,
    bench_load
);
criterion_main!(benches);
