use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, ErrorCode, Result};
use crate::model::OrchestrationPlan;

/// Stored orchestration plans, keyed by plan id.
#[derive(Debug, Clone, Default)]
pub struct PlanRepository {
    plans: BTreeMap<String, OrchestrationPlan>,
}

impl PlanRepository {
    pub fn new() -> Self {
        Self::default()
    }

    /// The plans shipped with the crate (`assets/plans.json`).
    pub fn seeded() -> Self {
        Self::from_json(include_str!("../../assets/plans.json")).expect("bundled plans are valid")
    }

    /// Parses a plan-definition document: a JSON array of plans.
    pub fn from_json(text: &str) -> Result<Self> {
        let plans: Vec<OrchestrationPlan> = serde_json::from_str(text)?;
        let mut repo = PlanRepository::new();
        for plan in plans {
            repo.store(plan)?;
        }
        Ok(repo)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn store(&mut self, plan: OrchestrationPlan) -> Result<()> {
        plan.validate()?;
        if self.plans.contains_key(&plan.plan_id) {
            return Err(Error::new(
                ErrorCode::InvalidConfig,
                format!("duplicate plan id {}", plan.plan_id),
            ));
        }
        self.plans.insert(plan.plan_id.clone(), plan);
        Ok(())
    }

    /// Rewrites the timeout and retry limit of every stored step.
    pub fn override_steps(&mut self, timeout_ms: Option<u64>, retry_limit: Option<u32>) {
        for plan in self.plans.values_mut() {
            for step in &mut plan.steps {
                if let Some(t) = timeout_ms {
                    step.timeout_ms = t;
                }
                if let Some(r) = retry_limit {
                    step.retry_limit = r;
                }
            }
        }
    }

    pub fn load_plan(&self, plan_id: &str) -> Result<OrchestrationPlan> {
        self.plans
            .get(plan_id)
            .cloned()
            .ok_or_else(|| Error::new(ErrorCode::PlanNotFound, format!("no plan {plan_id:?}")))
    }

    pub fn ids(&self) -> HashSet<String> {
        self.plans.keys().cloned().collect()
    }
}
