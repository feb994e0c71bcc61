//! Game definition and state.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pwl::{symmetric_difference_area, PwlError, PwlFunction, ABS_TOL};

/// One location of the city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbourhood {
    pub name: String,
    pub capacity: f64,
    pub utility: PwlFunction,
}

/// Neighbourhoods plus the total population mass `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CityInstance {
    neighbourhoods: Vec<Neighbourhood>,
    population: f64,
}

/// A population vector `x` with `0 <= x_i <= u_i` and `sum x_i = N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub index: usize,
    /// Rudimentary target payoff; absent for hand-drawn replacements.
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub cost: f64,
    pub g: PwlFunction,
}

/// Replacement utilities for a subset of locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvestmentPlan {
    entries: Vec<PlanEntry>,
    total_cost: f64,
}

/// A single reason an instance failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("an instance needs at least one neighbourhood")]
    NoNeighbourhoods,
    #[error("population {population} must be finite and positive")]
    BadPopulation { population: f64 },
    #[error("PopulationOutOfRange: population {population} outside [max capacity {min}, total capacity {max}]")]
    PopulationOutOfRange { population: f64, min: f64, max: f64 },
    #[error("duplicate neighbourhood name {0:?}")]
    DuplicateName(String),
    #[error("neighbourhood {name:?}: capacity {capacity} must be positive and finite")]
    NonPositiveCapacity { name: String, capacity: f64 },
    #[error("neighbourhood {name:?}: utility domain ends at {domain_end}, capacity is {capacity}")]
    CapacityMismatch {
        name: String,
        capacity: f64,
        domain_end: f64,
    },
    #[error("neighbourhood {name:?}: {source}")]
    Utility { name: String, source: PwlError },
}

/// Every violation found while validating an instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct InstanceError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid instance:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("allocation entry {index} = {value} outside [0, {capacity}]")]
    OutOfCapacity {
        index: usize,
        value: f64,
        capacity: f64,
    },
    #[error("allocation sums to {sum}, population is {population}")]
    MassMismatch { sum: f64, population: f64 },
    #[error("plan entry refers to location {index}, instance has {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("plan entry for location {index}: {source}")]
    DomainMismatch { index: usize, source: PwlError },
    #[error("negative input {0}")]
    NegativeInput(f64),
}

impl CityInstance {
    /// Checks every instance invariant and reports all violations at once.
    /// Utilities must be concave.
    pub fn new(neighbourhoods: Vec<Neighbourhood>, population: f64) -> Result<Self, InstanceError> {
        let mut violations = Vec::new();
        if neighbourhoods.is_empty() {
            violations.push(Violation::NoNeighbourhoods);
        }
        let mut names = HashSet::new();
        for nb in &neighbourhoods {
            if !names.insert(nb.name.as_str()) {
                violations.push(Violation::DuplicateName(nb.name.clone()));
            }
            if !(nb.capacity.is_finite() && nb.capacity > 0.0) {
                violations.push(Violation::NonPositiveCapacity {
                    name: nb.name.clone(),
                    capacity: nb.capacity,
                });
                continue;
            }
            let domain_end = nb.utility.capacity();
            if (domain_end - nb.capacity).abs() > ABS_TOL * nb.capacity.max(1.0) {
                violations.push(Violation::CapacityMismatch {
                    name: nb.name.clone(),
                    capacity: nb.capacity,
                    domain_end,
                });
            }
            if let Err(source) = nb.utility.require_concave() {
                violations.push(Violation::Utility {
                    name: nb.name.clone(),
                    source,
                });
            }
        }
        if !(population.is_finite() && population > 0.0) {
            violations.push(Violation::BadPopulation { population });
        } else if !neighbourhoods.is_empty() {
            let min = neighbourhoods.iter().map(|n| n.capacity).fold(0.0, f64::max);
            let max: f64 = neighbourhoods.iter().map(|n| n.capacity).sum();
            let slack = ABS_TOL * population;
            if population < min - slack || population > max + slack {
                violations.push(Violation::PopulationOutOfRange {
                    population,
                    min,
                    max,
                });
            }
        }
        if violations.is_empty() {
            Ok(CityInstance {
                neighbourhoods,
                population,
            })
        } else {
            Err(InstanceError { violations })
        }
    }

    pub fn neighbourhoods(&self) -> &[Neighbourhood] {
        &self.neighbourhoods
    }

    pub fn len(&self) -> usize {
        self.neighbourhoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbourhoods.is_empty()
    }

    pub fn population(&self) -> f64 {
        self.population
    }

    pub fn capacity(&self, i: usize) -> f64 {
        self.neighbourhoods[i].capacity
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.neighbourhoods.iter().map(|n| n.capacity).collect()
    }

    pub fn utility(&self, i: usize) -> &PwlFunction {
        &self.neighbourhoods[i].utility
    }

    /// Payoff `f_i(x_i)` of every location.
    pub fn payoffs(&self, x: &[f64]) -> Vec<f64> {
        self.neighbourhoods
            .iter()
            .zip(x)
            .map(|(n, &xi)| n.utility.value_at(xi))
            .collect()
    }

    /// Largest absolute utility slope over the instance.
    pub fn max_abs_slope(&self) -> f64 {
        self.neighbourhoods
            .iter()
            .map(|n| n.utility.max_abs_slope())
            .fold(0.0, f64::max)
    }

    /// Largest `|d(x f_i(x))/dx|` over the instance.
    pub fn welfare_slope_bound(&self) -> f64 {
        self.neighbourhoods
            .iter()
            .map(|n| n.utility.welfare_slope_bound())
            .fold(0.0, f64::max)
    }

    /// Largest peak utility `h_i`.
    pub fn max_peak(&self) -> f64 {
        self.neighbourhoods
            .iter()
            .map(|n| n.utility.peak_profile().h)
            .fold(0.0, f64::max)
    }

    /// Index of a location with the largest capacity (first on ties).
    pub(crate) fn largest_location(&self) -> usize {
        let mut best = 0;
        for i in 1..self.len() {
            if self.capacity(i) > self.capacity(best) {
                best = i;
            }
        }
        best
    }

    /// Returns a copy with `f_i` replaced by `g_i` at every planned location.
    pub fn apply_plan(&self, plan: &InvestmentPlan) -> Result<CityInstance, ModelError> {
        let mut neighbourhoods = self.neighbourhoods.clone();
        for entry in plan.entries() {
            let len = neighbourhoods.len();
            let nb = neighbourhoods
                .get_mut(entry.index)
                .ok_or(ModelError::IndexOutOfRange {
                    index: entry.index,
                    len,
                })?;
            let end = entry.g.capacity();
            if (end - nb.capacity).abs() > ABS_TOL * nb.capacity.max(1.0) {
                return Err(ModelError::DomainMismatch {
                    index: entry.index,
                    source: PwlError::DomainMismatch {
                        left: nb.capacity,
                        right: end,
                    },
                });
            }
            nb.utility = entry.g.clone();
        }
        Ok(CityInstance {
            neighbourhoods,
            population: self.population,
        })
    }
}

impl Allocation {
    /// Checks the allocation against `instance`: bounds with absolute slack
    /// [`ABS_TOL`] and total mass within `1e-9 N`.
    pub fn new(instance: &CityInstance, x: Vec<f64>) -> Result<Self, ModelError> {
        if x.len() != instance.len() {
            return Err(ModelError::DimensionMismatch {
                expected: instance.len(),
                got: x.len(),
            });
        }
        for (index, (&value, nb)) in x.iter().zip(instance.neighbourhoods()).enumerate() {
            if !(value >= -ABS_TOL && value <= nb.capacity + ABS_TOL) {
                return Err(ModelError::OutOfCapacity {
                    index,
                    value,
                    capacity: nb.capacity,
                });
            }
        }
        let sum: f64 = x.iter().sum();
        let population = instance.population();
        if (sum - population).abs() > ABS_TOL * population {
            return Err(ModelError::MassMismatch { sum, population });
        }
        Ok(Allocation(x))
    }

    pub(crate) fn from_vec_unchecked(x: Vec<f64>) -> Self {
        Allocation(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest coordinate-wise distance to `other`.
    pub fn max_distance(&self, other: &Allocation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for Allocation {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl InvestmentPlan {
    pub fn new(entries: Vec<PlanEntry>) -> Self {
        let total_cost = entries.iter().map(|e| e.cost).sum();
        InvestmentPlan {
            entries,
            total_cost,
        }
    }

    /// Keeps a declared total that exceeds the entry sum; a smaller total is
    /// raised to the entry sum.
    pub fn with_declared_total(entries: Vec<PlanEntry>, declared: f64) -> Self {
        let mut plan = InvestmentPlan::new(entries);
        plan.total_cost = plan.total_cost.max(declared);
        plan
    }

    /// Builds a plan from replacement functions, costing each entry as the
    /// area between the current and replacement utility.
    pub fn from_replacements(
        instance: &CityInstance,
        replacements: Vec<(usize, PwlFunction)>,
    ) -> Result<Self, ModelError> {
        let entries = replacements
            .into_iter()
            .map(|(index, g)| {
                let f = instance
                    .neighbourhoods()
                    .get(index)
                    .ok_or(ModelError::IndexOutOfRange {
                        index,
                        len: instance.len(),
                    })?;
                let cost = symmetric_difference_area(&f.utility, &g)
                    .map_err(|source| ModelError::DomainMismatch { index, source })?;
                Ok(PlanEntry {
                    index,
                    tau: None,
                    alpha: None,
                    beta: None,
                    cost,
                    g,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(InvestmentPlan::new(entries))
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum |f_i ⊕ g_i|` recomputed from the geometry rather than read from
    /// the entries.
    pub fn recomputed_cost(&self, instance: &CityInstance) -> Result<f64, ModelError> {
        self.entries.iter().try_fold(0.0, |acc, e| {
            let f = instance
                .neighbourhoods()
                .get(e.index)
                .ok_or(ModelError::IndexOutOfRange {
                    index: e.index,
                    len: instance.len(),
                })?;
            let area = symmetric_difference_area(&f.utility, &e.g)
                .map_err(|source| ModelError::DomainMismatch {
                    index: e.index,
                    source,
                })?;
            Ok(acc + area)
        })
    }
}

/// `wel(x) = sum x_i f_i(x_i)`.
pub fn welfare(instance: &CityInstance, x: &Allocation) -> Result<f64, ModelError> {
    if x.len() != instance.len() {
        return Err(ModelError::DimensionMismatch {
            expected: instance.len(),
            got: x.len(),
        });
    }
    Ok(welfare_of(instance, x.as_slice()))
}

pub(crate) fn welfare_of(instance: &CityInstance, x: &[f64]) -> f64 {
    instance
        .neighbourhoods()
        .iter()
        .zip(x)
        .map(|(n, &xi)| xi * n.utility.value_at(xi))
        .sum()
}

/// `opt / wel(eq)`, infinite when the equilibrium has zero welfare.
pub fn price_of_anarchy(opt_value: f64, eq_welfare: f64) -> Result<f64, ModelError> {
    if eq_welfare < 0.0 {
        return Err(ModelError::NegativeInput(eq_welfare));
    }
    if opt_value < 0.0 {
        return Err(ModelError::NegativeInput(opt_value));
    }
    if eq_welfare == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(opt_value / eq_welfare)
}
