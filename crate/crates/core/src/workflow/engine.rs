use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::control::InstanceControl;
use super::repository::PlanRepository;
use crate::error::{Error, ErrorCode, Result};
use crate::model::{
    InstanceState, MicroserviceInstance, OrchestrationPlan, PeerEntry, ProvisionRecord, StepKind,
    WorkflowStep,
};
use crate::trace::{Action, Tracer};

/// Label of the per-call detail events the engine records.
pub const CALL_LABEL: &str = "wf.call";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanExecution {
    pub execution_id: String,
    pub plan_id: String,
    pub component_id: String,
    pub step_cursor: usize,
    /// Attempts made per step; the last attempt is the one that settled it.
    pub step_attempts: Vec<u32>,
    pub outcome: Outcome,
}

/// Executes orchestration plans against deployed instances, one step at a
/// time, in plan order. Instances are visited in `instance_id` order.
pub struct Orchestrator {
    plans: Arc<PlanRepository>,
    control: Arc<dyn InstanceControl>,
    tracer: Tracer,
    retry_backoff: Duration,
    next_id: AtomicU64,
}

impl Orchestrator {
    pub fn new(
        plans: Arc<PlanRepository>,
        control: Arc<dyn InstanceControl>,
        tracer: Tracer,
    ) -> Self {
        Orchestrator {
            plans,
            control,
            tracer,
            retry_backoff: Duration::from_millis(50),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn with_retry_backoff(mut self, backoff: Duration) -> Self {
        self.retry_backoff = backoff;
        self
    }

    pub fn plans(&self) -> &PlanRepository {
        &self.plans
    }

    /// Fetches the plan from the workflow repository and runs it over
    /// `record`'s instances.
    pub async fn orchestrate(
        &self,
        plan_id: &str,
        record: &mut ProvisionRecord,
        correlation_id: &str,
    ) -> Result<PlanExecution> {
        self.tracer.emit(Action::PlanFetchRequest, correlation_id).await;
        let plan = self.plans.load_plan(plan_id)?;
        self.tracer.emit(Action::PlanFetchResponse, correlation_id).await;
        self.tracer
            .emit(Action::OrchestrateMicroservices, correlation_id)
            .await;
        self.execute_plan(&plan, record, correlation_id).await
    }

    /// Overwrites `target`'s peer table with `peers`.
    pub async fn distribute_peer_info(
        &self,
        target: &MicroserviceInstance,
        peers: &[MicroserviceInstance],
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()> {
        let entries: Vec<PeerEntry> = peers.iter().map(|p| p.peer_entry()).collect();
        self.control
            .post_peers(target, &entries, timeout, correlation_id)
            .await
    }

    pub async fn execute_plan(
        &self,
        plan: &OrchestrationPlan,
        record: &mut ProvisionRecord,
        correlation_id: &str,
    ) -> Result<PlanExecution> {
        if let Some(bad) = record
            .instances
            .iter()
            .find(|i| i.state != InstanceState::Deployed)
        {
            return Err(Error::new(
                ErrorCode::InvalidState,
                format!("instance {} is {:?}, expected deployed", bad.instance_id, bad.state),
            ));
        }
        let mut exec = PlanExecution {
            execution_id: format!("exec-{}", self.next_id.fetch_add(1, Ordering::Relaxed)),
            plan_id: plan.plan_id.clone(),
            component_id: record.component_id.clone(),
            step_cursor: 0,
            step_attempts: vec![0; plan.steps.len()],
            outcome: Outcome::Running,
        };

        let mut ordered = record.instances.clone();
        ordered.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));

        for (index, step) in plan.steps.iter().enumerate() {
            exec.step_cursor = index;
            let peers_expected = plan.steps[..index]
                .iter()
                .any(|s| s.kind == StepKind::DistributePeerInfo);
            let result = self
                .run_step(index, step, &ordered, peers_expected, &mut exec, correlation_id)
                .await;
            if let Err(err) = result {
                exec.outcome = Outcome::Failed;
                if let Error::StepFailed { instance_id, .. } = &err {
                    if let Some(inst) = record
                        .instances
                        .iter_mut()
                        .find(|i| &i.instance_id == instance_id)
                    {
                        let _ = inst.transition(InstanceState::Failed);
                    }
                }
                return Err(err);
            }
        }
        exec.step_cursor = plan.steps.len();
        for inst in &mut record.instances {
            inst.transition(InstanceState::Orchestrated)?;
        }
        exec.outcome = Outcome::Succeeded;
        Ok(exec)
    }

    async fn run_step(
        &self,
        index: usize,
        step: &WorkflowStep,
        ordered: &[MicroserviceInstance],
        peers_expected: bool,
        exec: &mut PlanExecution,
        correlation_id: &str,
    ) -> Result<()> {
        if step.kind == StepKind::CollectAccessInfo {
            // the access information is already in the deployment ack
            exec.step_attempts[index] = 1;
            return Ok(());
        }
        let timeout = Duration::from_millis(step.timeout_ms);
        let mut pending: Vec<&MicroserviceInstance> =
            ordered.iter().filter(|i| step.applies_to(i.role)).collect();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            exec.step_attempts[index] = attempt;
            let mut failed = Vec::new();
            let mut last_reason = String::new();
            for target in pending {
                self.tracer
                    .emit_detail(
                        CALL_LABEL,
                        correlation_id,
                        format!("{index}:{}:{}:{attempt}", step.kind, target.instance_id),
                    )
                    .await;
                let res = self
                    .call(step.kind, target, ordered, peers_expected, timeout, correlation_id)
                    .await;
                if let Err(e) = res {
                    tracing::debug!(step = index, instance = %target.instance_id, "call failed: {e}");
                    last_reason = e.to_string();
                    failed.push(target);
                }
            }
            if failed.is_empty() {
                return Ok(());
            }
            if attempt > step.retry_limit {
                return Err(Error::StepFailed {
                    step_index: index,
                    instance_id: failed[0].instance_id.clone(),
                    attempts: attempt,
                    reason: last_reason,
                });
            }
            pending = failed;
            tokio::time::sleep(self.retry_backoff).await;
        }
    }

    async fn call(
        &self,
        kind: StepKind,
        target: &MicroserviceInstance,
        all: &[MicroserviceInstance],
        peers_expected: bool,
        timeout: Duration,
        correlation_id: &str,
    ) -> Result<()> {
        let others: Vec<MicroserviceInstance> = all
            .iter()
            .filter(|i| i.instance_id != target.instance_id)
            .cloned()
            .collect();
        match kind {
            StepKind::CollectAccessInfo => Ok(()),
            StepKind::DistributePeerInfo => {
                self.distribute_peer_info(target, &others, timeout, correlation_id)
                    .await
            }
            StepKind::VerifyHealth => {
                let report = self.control.health(target, timeout, correlation_id).await?;
                if report.instance_id != target.instance_id {
                    return Err(Error::new(
                        ErrorCode::StepCallFailed,
                        format!(
                            "health of {} answered by {}",
                            target.instance_id, report.instance_id
                        ),
                    ));
                }
                if peers_expected {
                    let mut got: Vec<&str> =
                        report.peers.iter().map(|p| p.instance_id.as_str()).collect();
                    got.sort_unstable();
                    let want: Vec<&str> = others.iter().map(|p| p.instance_id.as_str()).collect();
                    if got != want {
                        return Err(Error::new(
                            ErrorCode::StepCallFailed,
                            format!(
                                "{} reports peers {got:?}, expected {want:?}",
                                target.instance_id
                            ),
                        ));
                    }
                }
                Ok(())
            }
            StepKind::NotifyComplete => {
                self.control
                    .set_state(target, InstanceState::Orchestrated, timeout, correlation_id)
                    .await
            }
        }
    }
}
