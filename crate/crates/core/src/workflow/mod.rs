//! Workflow repository and the microservice orchestrator that executes its
//! plans.

mod control;
mod engine;
mod repository;

pub use control::{HttpControl, InstanceControl};
pub use engine::{Orchestrator, Outcome, PlanExecution, CALL_LABEL};
pub use repository::PlanRepository;

#[cfg(test)]
mod tests {
    use std::collections::{HashMap, HashSet};
    use std::sync::Arc;
    use std::time::Duration;

    use async_trait::async_trait;
    use parking_lot::Mutex;
    use proptest::prelude::*;

    use super::*;
    use crate::error::{Error, ErrorCode, Result};
    use crate::model::wire::HealthReport;
    use crate::model::{
        AccessInfo, InstanceState, MicroserviceInstance, OrchestrationPlan, PeerEntry,
        ProvisionRecord, Role, StepKind, WorkflowStep,
    };
    use crate::trace::Tracer;

    #[derive(Default)]
    struct FakeControl {
        tables: Mutex<HashMap<String, Vec<PeerEntry>>>,
        states: Mutex<HashMap<String, InstanceState>>,
        calls: Mutex<Vec<(&'static str, String)>>,
        dead: HashSet<String>,
    }

    impl FakeControl {
        fn with_dead(dead: &[&str]) -> Self {
            FakeControl {
                dead: dead.iter().map(|s| s.to_string()).collect(),
                ..Default::default()
            }
        }

        fn hit(&self, op: &'static str, id: &str) -> Result<()> {
            self.calls.lock().push((op, id.to_string()));
            if self.dead.contains(id) {
                Err(Error::new(ErrorCode::StepCallFailed, "black-holed"))
            } else {
                Ok(())
            }
        }

        fn peer_ids(&self, id: &str) -> Vec<String> {
            let mut v: Vec<_> = self
                .tables
                .lock()
                .get(id)
                .map(|t| t.iter().map(|p| p.instance_id.clone()).collect())
                .unwrap_or_default();
            v.sort();
            v
        }
    }

    #[async_trait]
    impl InstanceControl for FakeControl {
        async fn post_peers(
            &self,
            target: &MicroserviceInstance,
            peers: &[PeerEntry],
            _timeout: Duration,
            _c: &str,
        ) -> Result<()> {
            self.hit("peers", &target.instance_id)?;
            self.tables
                .lock()
                .insert(target.instance_id.clone(), peers.to_vec());
            Ok(())
        }

        async fn health(
            &self,
            target: &MicroserviceInstance,
            _timeout: Duration,
            _c: &str,
        ) -> Result<HealthReport> {
            self.hit("health", &target.instance_id)?;
            Ok(HealthReport {
                instance_id: target.instance_id.clone(),
                role: target.role,
                state: InstanceState::Deployed,
                peers: self
                    .tables
                    .lock()
                    .get(&target.instance_id)
                    .cloned()
                    .unwrap_or_default(),
                contents: vec![],
                registered_controller: None,
            })
        }

        async fn set_state(
            &self,
            target: &MicroserviceInstance,
            state: InstanceState,
            _timeout: Duration,
            _c: &str,
        ) -> Result<()> {
            self.hit("state", &target.instance_id)?;
            self.states.lock().insert(target.instance_id.clone(), state);
            Ok(())
        }
    }

    fn inst(id: &str, role: Role) -> MicroserviceInstance {
        MicroserviceInstance {
            instance_id: id.into(),
            role,
            control_access: AccessInfo::new(format!("http://127.0.0.1:9/{id}/c")),
            data_access: AccessInfo::new(format!("http://127.0.0.1:9/{id}/d")),
            pod_id: "pod".into(),
            state: InstanceState::Deployed,
        }
    }

    fn record(instances: Vec<MicroserviceInstance>) -> ProvisionRecord {
        let mut r = ProvisionRecord::new("comp".into(), "t".into(), "pod".into(), 0);
        r.instances = instances;
        r
    }

    fn orchestrator(control: Arc<FakeControl>) -> Orchestrator {
        Orchestrator::new(
            Arc::new(PlanRepository::seeded()),
            control,
            Tracer::null("orchestrator"),
        )
        .with_retry_backoff(Duration::ZERO)
    }

    fn fast_plan() -> OrchestrationPlan {
        let mut p = OrchestrationPlan::abr_wire_v1();
        for s in &mut p.steps {
            s.timeout_ms = 50;
        }
        p
    }

    #[tokio::test]
    async fn cache_and_abr_learn_each_other() {
        let fake = Arc::new(FakeControl::default());
        let orch = orchestrator(fake.clone());
        let mut r = record(vec![inst("i-cache", Role::CacheNode), inst("i-abr", Role::AbrStreamingServer)]);
        let exec = orch.orchestrate("abr-wire-v1", &mut r, "c").await.unwrap();
        assert_eq!(exec.outcome, Outcome::Succeeded);
        assert_eq!(exec.step_cursor, 4);
        assert_eq!(fake.peer_ids("i-cache"), vec!["i-abr"]);
        assert_eq!(fake.peer_ids("i-abr"), vec!["i-cache"]);
        let abr_entry = &fake.tables.lock()["i-cache"][0];
        assert_eq!(abr_entry.data_access.endpoint, "http://127.0.0.1:9/i-abr/d");
        assert!(r.instances.iter().all(|i| i.state == InstanceState::Orchestrated));
        assert_eq!(fake.states.lock()["i-abr"], InstanceState::Orchestrated);
    }

    #[tokio::test]
    async fn empty_plan_single_instance_makes_no_calls() {
        let fake = Arc::new(FakeControl::default());
        let orch = orchestrator(fake.clone());
        let plan = OrchestrationPlan {
            plan_id: "empty".into(),
            steps: vec![],
        };
        let mut r = record(vec![inst("solo", Role::CacheNode)]);
        let exec = orch.execute_plan(&plan, &mut r, "c").await.unwrap();
        assert_eq!(exec.outcome, Outcome::Succeeded);
        assert!(fake.calls.lock().is_empty());
        assert_eq!(r.instances[0].state, InstanceState::Orchestrated);
    }

    #[tokio::test]
    async fn black_holed_instance_exhausts_retries() {
        let fake = Arc::new(FakeControl::with_dead(&["i-abr"]));
        let orch = orchestrator(fake.clone());
        let mut r = record(vec![inst("i-cache", Role::CacheNode), inst("i-abr", Role::AbrStreamingServer)]);
        let err = orch.execute_plan(&fast_plan(), &mut r, "c").await.unwrap_err();
        assert_eq!(err.code(), ErrorCode::OrchestrationStepFailed);
        match err {
            Error::StepFailed {
                step_index,
                instance_id,
                attempts,
                ..
            } => {
                assert_eq!(step_index, 1);
                assert_eq!(instance_id, "i-abr");
                assert_eq!(attempts, 4);
            }
            e => panic!("{e}"),
        }
        let to_abr = fake.calls.lock().iter().filter(|(_, id)| id == "i-abr").count();
        assert_eq!(to_abr, 4);
        // the healthy peer is not re-sent on retries
        let to_cache = fake.calls.lock().iter().filter(|(_, id)| id == "i-cache").count();
        assert_eq!(to_cache, 1);
        let abr = r.instances.iter().find(|i| i.instance_id == "i-abr").unwrap();
        assert_eq!(abr.state, InstanceState::Failed);
    }

    #[tokio::test]
    async fn non_deployed_instances_rejected() {
        let fake = Arc::new(FakeControl::default());
        let orch = orchestrator(fake);
        let mut i = inst("a", Role::CacheNode);
        i.state = InstanceState::Orchestrated;
        let mut r = record(vec![i]);
        let err = orch.execute_plan(&fast_plan(), &mut r, "c").await.unwrap_err();
        assert_eq!(err.code(), ErrorCode::InvalidState);
    }

    #[tokio::test]
    async fn distribute_peer_info_overwrites() {
        let fake = Arc::new(FakeControl::default());
        let orch = orchestrator(fake.clone());
        let cache = inst("cache", Role::CacheNode);
        let abr = inst("abr", Role::AbrStreamingServer);
        let t = Duration::from_millis(50);
        orch.distribute_peer_info(&cache, &[abr.clone()], t, "c").await.unwrap();
        orch.distribute_peer_info(&cache, &[abr.clone()], t, "c").await.unwrap();
        assert_eq!(fake.peer_ids("cache"), vec!["abr"]);
        let health = fake.health(&cache, t, "c").await.unwrap();
        assert_eq!(health.peers, vec![abr.peer_entry()]);
        orch.distribute_peer_info(&cache, &[], t, "c").await.unwrap();
        assert!(fake.peer_ids("cache").is_empty());
    }

    #[tokio::test]
    async fn role_filtered_step_only_touches_matching_roles() {
        let fake = Arc::new(FakeControl::default());
        let orch = orchestrator(fake.clone());
        let plan = OrchestrationPlan {
            plan_id: "only-cache".into(),
            steps: vec![WorkflowStep::new(StepKind::DistributePeerInfo).targeting(Role::CacheNode)],
        };
        let mut r = record(vec![inst("a", Role::CacheNode), inst("b", Role::AbrStreamingServer)]);
        orch.execute_plan(&plan, &mut r, "c").await.unwrap();
        assert_eq!(*fake.calls.lock(), vec![("peers", "a".to_string())]);
    }

    fn roles() -> impl Strategy<Value = Vec<Role>> {
        prop::collection::vec(
            prop_oneof![
                Just(Role::CacheNode),
                Just(Role::AbrStreamingServer),
                Just(Role::Extensible)
            ],
            1..=5,
        )
    }

    fn run<F: std::future::Future>(f: F) -> F::Output {
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap()
            .block_on(f)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn peer_completeness(roles in roles(), salt in 0u32..1000) {
            let instances: Vec<_> = roles
                .iter()
                .enumerate()
                .map(|(i, r)| inst(&format!("i{salt}-{}", (i * 7919) % 97), *r))
                .collect();
            let ids: HashSet<String> = instances.iter().map(|i| i.instance_id.clone()).collect();
            prop_assume!(ids.len() == instances.len());
            let fake = Arc::new(FakeControl::default());
            let orch = orchestrator(fake.clone());
            let mut r = record(instances);
            let exec = run(orch.execute_plan(&fast_plan(), &mut r, "c")).unwrap();
            prop_assert_eq!(exec.outcome, Outcome::Succeeded);
            for id in &ids {
                let mut want: Vec<String> = ids.iter().filter(|o| *o != id).cloned().collect();
                want.sort();
                prop_assert_eq!(fake.peer_ids(id), want);
            }
        }

        #[test]
        fn retry_bound(retry_limit in 0u32..5, n in 1usize..4) {
            let instances: Vec<_> = (0..n).map(|i| inst(&format!("i{i}"), Role::CacheNode)).collect();
            let fake = Arc::new(FakeControl::with_dead(&["i0"]));
            let orch = orchestrator(fake.clone());
            let mut plan = fast_plan();
            for s in &mut plan.steps {
                s.retry_limit = retry_limit;
            }
            let mut r = record(instances);
            let err = run(orch.execute_plan(&plan, &mut r, "c")).unwrap_err();
            prop_assert_eq!(err.code(), ErrorCode::OrchestrationStepFailed);
            let hits = fake.calls.lock().iter().filter(|(_, id)| id == "i0").count();
            prop_assert_eq!(hits as u32, 1 + retry_limit);
        }

        #[test]
        fn deterministic_call_sequence(roles in roles()) {
            // Same plan over two records whose ids differ but sort the same way.
            let mk = |prefix: &str| -> Vec<MicroserviceInstance> {
                roles.iter().enumerate().map(|(i, r)| inst(&format!("{prefix}{i}"), *r)).rev().collect()
            };
            let mut seqs = Vec::new();
            for prefix in ["a-", "b-"] {
                let fake = Arc::new(FakeControl::default());
                let orch = orchestrator(fake.clone());
                let mut r = record(mk(prefix));
                run(orch.execute_plan(&fast_plan(), &mut r, "c")).unwrap();
                let calls: Vec<(&str, String)> = fake
                    .calls
                    .lock()
                    .iter()
                    .map(|(op, id)| (*op, id.trim_start_matches(prefix).to_string()))
                    .collect();
                seqs.push(calls);
            }
            prop_assert_eq!(&seqs[0], &seqs[1]);
            // grouped by step, steps in plan order
            let ops: Vec<&str> = seqs[0].iter().map(|(op, _)| *op).collect();
            let mut dedup = ops.clone();
            dedup.dedup();
            prop_assert_eq!(dedup, vec!["peers", "health", "state"]);
        }
    }
}
