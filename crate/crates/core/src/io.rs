//! JSON schemas for scenarios and plans.
//!
//! Scenario:
//! `{"population": N, "neighbourhoods": [{"name": .., "capacity": .., "utility": {"breakpoints": [[x, y], ..]}}]}`
//!
//! Plan:
//! `{"epsilon": e, "benchmark": W, "branch": .., "entries": [{"index", "tau", "alpha", "beta", "cost", "g"}], "total_cost": C}`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CityInstance, InstanceError, InvestmentPlan, Neighbourhood, PlanEntry, Violation};
use crate::planner::{Branch, PlannerDiagnostics};
use crate::pwl::{Breakpoints, PwlFunction};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] InstanceError),
    #[error("plan total_cost {declared} is below the sum of entry costs {summed}")]
    PlanTotalMismatch { declared: f64, summed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighbourhoodFile {
    pub name: String,
    pub capacity: f64,
    pub utility: Breakpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub population: f64,
    pub neighbourhoods: Vec<NeighbourhoodFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub epsilon: Option<f64>,
    pub benchmark: Option<f64>,
    pub branch: Option<Branch>,
    pub entries: Vec<PlanEntry>,
    pub total_cost: f64,
}

impl ScenarioFile {
    pub fn from_instance(instance: &CityInstance) -> Self {
        ScenarioFile {
            population: instance.population(),
            neighbourhoods: instance
                .neighbourhoods()
                .iter()
                .map(|n| NeighbourhoodFile {
                    name: n.name.clone(),
                    capacity: n.capacity,
                    utility: n.utility.clone().into(),
                })
                .collect(),
        }
    }

    /// Validates the scenario, reporting every violation (breakpoint errors
    /// included) in one [`InstanceError`].
    pub fn into_instance(self) -> Result<CityInstance, InstanceError> {
        let mut violations = Vec::new();
        let mut neighbourhoods = Vec::with_capacity(self.neighbourhoods.len());
        for raw in self.neighbourhoods {
            let points = raw.utility.breakpoints.iter().map(|p| (p[0], p[1])).collect();
            match PwlFunction::new(points) {
                Ok(utility) => neighbourhoods.push(Neighbourhood {
                    name: raw.name,
                    capacity: raw.capacity,
                    utility,
                }),
                Err(source) => violations.push(Violation::Utility {
                    name: raw.name,
                    source,
                }),
            }
        }
        match CityInstance::new(neighbourhoods, self.population) {
            Ok(inst) if violations.is_empty() => Ok(inst),
            Ok(_) => Err(InstanceError { violations }),
            Err(mut e) => {
                violations.append(&mut e.violations);
                Err(InstanceError { violations })
            }
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<CityInstance, IoError> {
    let raw: ScenarioFile = serde_json::from_str(text)?;
    Ok(raw.into_instance()?)
}

pub fn scenario_to_json(instance: &CityInstance) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_instance(instance)).expect("plain data serializes")
}

impl PlanFile {
    pub fn new(plan: &InvestmentPlan, diagnostics: Option<&PlannerDiagnostics>) -> Self {
        PlanFile {
            epsilon: diagnostics.map(|d| d.epsilon),
            benchmark: diagnostics.map(|d| d.benchmark),
            branch: diagnostics.map(|d| d.branch),
            entries: plan.entries().to_vec(),
            total_cost: plan.total_cost(),
        }
    }

    /// A declared total above the entry sum is kept, so certification
    /// judges the plan by what it claims to spend; one below is rejected.
    pub fn into_plan(self) -> Result<InvestmentPlan, IoError> {
        let summed: f64 = self.entries.iter().map(|e| e.cost).sum();
        if self.total_cost < summed - 1e-9 * summed.abs().max(1.0) {
            return Err(IoError::PlanTotalMismatch {
                declared: self.total_cost,
                summed,
            });
        }
        Ok(InvestmentPlan::with_declared_total(self.entries, self.total_cost))
    }
}

pub fn parse_plan(text: &str) -> Result<InvestmentPlan, IoError> {
    serde_json::from_str::<PlanFile>(text)?.into_plan()
}
