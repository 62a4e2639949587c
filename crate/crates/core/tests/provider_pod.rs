use std::sync::Arc;
use std::time::Duration;

use cdn_flyprov::fault::{FaultMode, FaultEndpoint};
use cdn_flyprov::http::{client, decode, loopback, serve, ServiceHandle};
use cdn_flyprov::model::wire::{
    DisposeResponse, HealthReport, PodStatus, ProvisionResponse, CORRELATION_HEADER,
};
use cdn_flyprov::model::{
    AccessInfo, ComponentSummary, ContentItem, InstanceState, ProvisionStatus, Region, Role,
};
use cdn_flyprov::pod::{AbrManifest, ControlFault, InProcessBackend, MediaServer, PodRuntime};
use cdn_flyprov::provider::{component_provider, ComponentRepository, ProviderOptions};
use cdn_flyprov::trace::{Action, Collector, Tracer};
use cdn_flyprov::workflow::PlanRepository;
use cdn_flyprov::ErrorCode;

struct Rig {
    collector: Arc<Collector>,
    backend: Arc<InProcessBackend>,
    pod: Arc<PodRuntime>,
    pod_access: AccessInfo,
    provider: AccessInfo,
    _handles: Vec<ServiceHandle>,
}

async fn rig(plans: PlanRepository, repo: ComponentRepository) -> Rig {
    let collector = Collector::new();
    let tracer = Tracer::new("test", collector.clone());
    let media = Arc::new(
        MediaServer::new(&[ContentItem {
            content_id: "c1".into(),
            size_bytes: 20_000,
            duration_s: 13.0,
            blob_seed: 11,
        }])
        .unwrap(),
    );
    let media_h = serve(loopback(None, 0), media.router()).await.unwrap();
    let backend = Arc::new(InProcessBackend::new(tracer.clone()));
    let pod = Arc::new(PodRuntime::new(
        "pod-mtl-1",
        Region::id("quebec"),
        4,
        backend.clone(),
        Some(media_h.access("/")),
    ));
    let pod_h = serve(loopback(None, 0), pod.router()).await.unwrap();
    let opts = ProviderOptions {
        retry_backoff: Duration::from_millis(10),
        ..Default::default()
    };
    let mgr = component_provider(Arc::new(repo), Arc::new(plans), &tracer, &opts);
    let prov_h = serve(loopback(None, 0), mgr.router()).await.unwrap();
    Rig {
        collector,
        backend,
        pod,
        pod_access: pod_h.access("/"),
        provider: prov_h.access("/"),
        _handles: vec![media_h, pod_h, prov_h],
    }
}

async fn provision(r: &Rig, type_id: &str, corr: &str) -> cdn_flyprov::Result<ProvisionResponse> {
    let resp = client()
        .post(r.provider.url(&format!("/CDNComponent/{type_id}")))
        .header(CORRELATION_HEADER, corr)
        .json(&serde_json::json!({ "pod_access": r.pod_access }))
        .send()
        .await
        .unwrap();
    decode(resp).await
}

#[tokio::test]
async fn provision_orchestrates_and_dispose_restores() {
    let r = rig(PlanRepository::seeded(), ComponentRepository::seeded()).await;
    let c = client();
    let cat: Vec<ComponentSummary> = decode(
        c.get(r.provider.url("/CDNComponentCatalogue")).send().await.unwrap(),
    )
    .await
    .unwrap();
    assert!(cat.iter().any(|t| t.features.contains("ABR-streaming")));

    let before = r.pod.status().await;
    let ack = provision(&r, "abr-surrogate", "run-1").await.unwrap();
    assert!(ack.cdn_component_id.starts_with("cmp-"));

    let labels: Vec<String> = r
        .collector
        .for_correlation("run-1")
        .into_iter()
        .map(|e| e.action)
        .filter(|a| a.starts_with('F'))
        .collect();
    let mut want = vec![Action::DeployRequest.label()];
    for _ in 0..2 {
        want.extend([
            Action::PackageFetchRequest.label(),
            Action::PackageFetchResponse.label(),
            Action::DeployOnPod.label(),
        ]);
    }
    want.extend(
        [
            Action::DeployAck,
            Action::OrchestrateRequest,
            Action::PlanFetchRequest,
            Action::PlanFetchResponse,
            Action::OrchestrateMicroservices,
            Action::OrchestrateAck,
            Action::ProvisionAck,
        ]
        .map(|a| a.label()),
    );
    assert_eq!(labels, want);

    let status = r.pod.status().await;
    assert_eq!(status.instances.len(), 2);
    assert!(status.instances.iter().all(|i| i.state == InstanceState::Orchestrated));
    let cache = status.instances.iter().find(|i| i.role == Role::CacheNode).unwrap();
    let abr = status.instances.iter().find(|i| i.role == Role::AbrStreamingServer).unwrap();
    let health: HealthReport =
        decode(c.get(cache.control_access.url("/health")).send().await.unwrap()).await.unwrap();
    assert_eq!(health.peers.len(), 1);
    assert_eq!(health.peers[0].instance_id, abr.instance_id);
    assert_eq!(ack.surrogate_control.as_ref(), Some(&cache.control_access));
    assert_eq!(ack.surrogate_data.as_ref(), Some(&abr.data_access));

    // dispose, then the second dispose fails
    let del = c
        .delete(r.provider.url(&format!("/CDNComponent/{}", ack.cdn_component_id)))
        .send()
        .await
        .unwrap();
    assert_eq!(del.json::<DisposeResponse>().await.unwrap().success, true);
    let after = r.pod.status().await;
    assert_eq!(after.instances, before.instances);
    assert_eq!(after.capacity_free, before.capacity_free);
    assert!(c.get(cache.control_access.url("/health")).send().await.is_err());
    let again = c
        .delete(r.provider.url(&format!("/CDNComponent/{}", ack.cdn_component_id)))
        .send()
        .await
        .unwrap();
    let body: DisposeResponse = again.json().await.unwrap();
    assert!(!body.success);
    assert_eq!(body.error.unwrap().code, ErrorCode::ComponentNotFound);
}

#[tokio::test]
async fn abr_reads_through_cache_peer() {
    let mut repo = ComponentRepository::new();
    let seeded = ComponentRepository::seeded();
    for id in ["pkg-cache-node-1", "pkg-abr-server-1"] {
        repo.store_package(seeded.fetch_package(id).unwrap()).unwrap();
    }
    let mut ty = seeded.component_type("abr-surrogate").unwrap().clone();
    ty.microservices[0]
        .config
        .insert("bootstrap_content".into(), "c1".into());
    repo.register_type(ty).unwrap();
    let r = rig(PlanRepository::seeded(), repo).await;
    let ack = provision(&r, "abr-surrogate", "run-2").await.unwrap();
    let data = ack.surrogate_data.unwrap();
    let c = client();
    let m: AbrManifest =
        decode(c.get(data.url("/contents/c1/manifest")).send().await.unwrap()).await.unwrap();
    assert_eq!(m.segment_count(), 4);
    let seg = c
        .get(data.url(&format!("/contents/c1/reps/400k/segments/0")))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(seg.len(), 200_000);
    let seg2 = c
        .get(data.url("/contents/c1/reps/400k/segments/0"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(seg, seg2);
    let missing = c.get(data.url("/contents/c1/reps/400k/segments/4")).send().await.unwrap();
    assert_eq!(missing.status().as_u16(), 404);
}

#[tokio::test]
async fn unknown_type_never_contacts_pod() {
    let r = rig(PlanRepository::seeded(), ComponentRepository::seeded()).await;
    let err = provision(&r, "nonexistent", "x").await.unwrap_err();
    assert_eq!(err.code(), ErrorCode::UnknownComponentType);
    assert!(r.collector.snapshot().is_empty());
}

#[tokio::test]
async fn black_holed_pod_is_unreachable() {
    let mut r = rig(PlanRepository::seeded(), ComponentRepository::seeded()).await;
    let hole = FaultEndpoint::start(FaultMode::BlackHole).await.unwrap();
    r.pod_access = hole.access("/");
    let tracer = Tracer::new("t", r.collector.clone());
    let opts = ProviderOptions {
        pod_timeout: Duration::from_millis(200),
        ..Default::default()
    };
    let mgr = component_provider(
        Arc::new(ComponentRepository::seeded()),
        Arc::new(PlanRepository::seeded()),
        &tracer,
        &opts,
    );
    let err = mgr
        .provision_component("abr-surrogate", &r.pod_access, "f")
        .await
        .unwrap_err();
    assert_eq!(err.code(), ErrorCode::PodUnreachable);
    assert!(mgr.records().iter().all(|rec| rec.status != ProvisionStatus::Provisioned));
}

#[tokio::test]
async fn black_holed_control_fails_step_after_retries() {
    let mut plans = PlanRepository::seeded();
    plans.override_steps(Some(150), None);
    let r = rig(plans, ComponentRepository::seeded()).await;
    r.backend.inject_control_fault(Some(ControlFault {
        role: Role::AbrStreamingServer,
        mode: FaultMode::BlackHole,
    }));
    let err = provision(&r, "abr-surrogate", "f").await.unwrap_err();
    assert_eq!(err.code(), ErrorCode::OrchestrationStepFailed);
    assert_eq!(r.backend.fault_attempts(), 4);
    let status: PodStatus = r.pod.status().await;
    assert!(status.instances.is_empty());
}

#[tokio::test]
async fn missing_second_package_cleans_up() {
    let mut repo = ComponentRepository::seeded();
    repo.remove_package("pkg-abr-server-1");
    let r = rig(PlanRepository::seeded(), repo).await;
    let err = provision(&r, "abr-surrogate", "m").await.unwrap_err();
    assert_eq!(err.code(), ErrorCode::DeploymentFailed);
    assert!(r.pod.status().await.instances.is_empty());
    assert_eq!(r.pod.status().await.capacity_free, 4);
}

#[tokio::test]
async fn capacity_exhausted() {
    let r = rig(PlanRepository::seeded(), ComponentRepository::seeded()).await;
    provision(&r, "abr-surrogate", "a").await.unwrap();
    provision(&r, "abr-surrogate", "b").await.unwrap();
    let err = provision(&r, "cache-surrogate", "c").await.unwrap_err();
    assert_eq!(err.code(), ErrorCode::CapacityExhausted);
    let err = r.pod.undeploy("nope").await.unwrap_err();
    assert_eq!(err.code(), ErrorCode::InstanceNotFound);
}
