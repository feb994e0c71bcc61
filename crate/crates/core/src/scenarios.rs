//! Built-in instances with their known facts, plus random generators.
//!
//! | name                    | instance                                  | plan                         |
//! |-------------------------|-------------------------------------------|------------------------------|
//! | `fig-ne`                | two identical tents through `(0,δ),(½,1),(1,0)` | none                   |
//! | `fig-poa`               | red tent as above, blue `(0,3δ),(½,1+2δ),(1,2δ)` | none                  |
//! | `fig-supra-negative`    | `fig-ne`                                  | raise blue to the `fig-poa` blue |
//! | `fig-supra-improvement` | `fig-poa`                                 | raise red to match blue      |
//! | `thm2-lower-bound`      | `1 - x` against a zero utility, `N = 1`   | flat tail at `ε/4`           |
//! | `donut`                 | one inner city (u = 1000), ten suburbs (u = 100) | lift the inner city   |

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{
    best_response_dynamics, potential, proportional_start, uniform_start, DynamicsConfig,
    EquilibriumReport,
};
use crate::model::{price_of_anarchy, Allocation, CityInstance, InvestmentPlan, Neighbourhood};
use crate::opt::{optimal_welfare, OptError};
use crate::pwl::PwlFunction;

pub const SCENARIO_NAMES: [&str; 6] = [
    "fig-ne",
    "fig-poa",
    "fig-supra-negative",
    "fig-supra-improvement",
    "thm2-lower-bound",
    "donut",
];

pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario {scenario} requires parameter {param:?}")]
    MissingParam { scenario: String, param: &'static str },
    #[error("parameter {param:?} = {value} is out of range")]
    BadParam { param: &'static str, value: f64 },
    #[error(transparent)]
    Opt(#[from] OptError),
}

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactSource {
    /// A value stated with the original example.
    Reported,
    /// Follows immediately from the definitions.
    Trivial,
    /// Computed by an independent oracle and frozen.
    Derived,
}

/// What a fact measures. "Equilibrium" quantities refer to dynamics run from
/// the scenario's start; "planned" ones to dynamics on the planned instance
/// started from that equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "location", rename_all = "kebab-case")]
pub enum Quantity {
    EquilibriumMass(usize),
    EquilibriumDensity(usize),
    EquilibriumPayoff(usize),
    EquilibriumWelfare,
    Optimum,
    PriceOfAnarchy,
    StartPotential,
    PlanCost,
    PlannedMass(usize),
    PlannedPayoff(usize),
    PlannedWelfare,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownFact {
    pub label: &'static str,
    pub quantity: Quantity,
    pub expected: f64,
    pub tolerance: f64,
    pub source: FactSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub instance: CityInstance,
    /// Starting allocation for the scenario's dynamics.
    pub start: Allocation,
    pub plan: Option<InvestmentPlan>,
    pub known_facts: Vec<KnownFact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactCheck {
    pub label: &'static str,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub ok: bool,
}

fn fact(label: &'static str, quantity: Quantity, expected: f64, tolerance: f64, source: FactSource) -> KnownFact {
    KnownFact {
        label,
        quantity,
        expected,
        tolerance,
        source,
    }
}

fn neighbourhood(name: &str, points: Vec<(f64, f64)>) -> Neighbourhood {
    let utility = PwlFunction::new(points).expect("built-in utilities are concave");
    Neighbourhood {
        name: name.to_string(),
        capacity: utility.capacity(),
        utility,
    }
}

fn tent(delta_left: f64, peak: f64, right: f64) -> Vec<(f64, f64)> {
    vec![(0.0, delta_left), (0.5, peak), (1.0, right)]
}

fn base_tent(delta: f64) -> Vec<(f64, f64)> {
    tent(delta, 1.0, 0.0)
}

fn raised_tent(delta: f64) -> Vec<(f64, f64)> {
    tent(3.0 * delta, 1.0 + 2.0 * delta, 2.0 * delta)
}

fn two_location(red: Vec<(f64, f64)>, blue: Vec<(f64, f64)>) -> CityInstance {
    CityInstance::new(vec![neighbourhood("red", red), neighbourhood("blue", blue)], 1.0)
        .expect("built-in instance is valid")
}

fn delta_param(params: &BTreeMap<String, f64>) -> Result<f64, ScenarioError> {
    let delta = params.get("delta").copied().unwrap_or(DEFAULT_DELTA);
    if !(delta.is_finite() && (0.0..0.5).contains(&delta)) {
        return Err(ScenarioError::BadParam {
            param: "delta",
            value: delta,
        });
    }
    Ok(delta)
}

fn replace(instance: &CityInstance, index: usize, points: Vec<(f64, f64)>) -> InvestmentPlan {
    let g = PwlFunction::relaxed(points).expect("built-in replacement is well formed");
    InvestmentPlan::from_replacements(instance, vec![(index, g)]).expect("domains match")
}

fn with_params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Looks up a built-in scenario. `delta` defaults to 0.01; `thm2-lower-bound`
/// needs `epsilon` in `(0, 1]`.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Scenario, ScenarioError> {
    use FactSource::*;
    use Quantity::*;
    match name {
        "fig-ne" => {
            let delta = delta_param(params)?;
            let instance = two_location(base_tent(delta), base_tent(delta));
            Ok(Scenario {
                name: name.into(),
                params: with_params(&[("delta", delta)]),
                start: uniform_start(&instance),
                instance,
                plan: None,
                known_facts: vec![
                    fact("equilibrium red mass", EquilibriumMass(0), 0.5, 1e-6, Reported),
                    fact("equilibrium blue mass", EquilibriumMass(1), 0.5, 1e-6, Reported),
                    fact("equilibrium welfare", EquilibriumWelfare, 1.0, 1e-8, Reported),
                    fact("optimal welfare", Optimum, 1.0, 1e-6, Reported),
                ],
            })
        }
        "fig-poa" => {
            let delta = delta_param(params)?;
            let instance = two_location(base_tent(delta), raised_tent(delta));
            Ok(Scenario {
                name: name.into(),
                params: with_params(&[("delta", delta)]),
                start: uniform_start(&instance),
                instance,
                plan: None,
                known_facts: vec![
                    fact("equilibrium red mass", EquilibriumMass(0), 0.0, 1e-6, Reported),
                    fact("equilibrium blue mass", EquilibriumMass(1), 1.0, 1e-6, Reported),
                    fact("equilibrium welfare", EquilibriumWelfare, 2.0 * delta, 1e-8, Reported),
                    fact("optimal welfare", Optimum, 1.0 + delta, 1e-6, Reported),
                    fact(
                        "price of anarchy",
                        PriceOfAnarchy,
                        (1.0 + delta) / (2.0 * delta),
                        1e-3,
                        Reported,
                    ),
                ],
            })
        }
        "fig-supra-negative" => {
            let delta = delta_param(params)?;
            let instance = two_location(base_tent(delta), base_tent(delta));
            let plan = replace(&instance, 1, raised_tent(delta));
            Ok(Scenario {
                name: name.into(),
                params: with_params(&[("delta", delta)]),
                start: uniform_start(&instance),
                instance,
                plan: Some(plan),
                known_facts: vec![
                    fact("equilibrium welfare before", EquilibriumWelfare, 1.0, 1e-8, Reported),
                    fact("investment cost", PlanCost, 2.0 * delta, 1e-9, Reported),
                    fact("equilibrium welfare after", PlannedWelfare, 2.0 * delta, 1e-8, Reported),
                ],
            })
        }
        "fig-supra-improvement" => {
            let delta = delta_param(params)?;
            let instance = two_location(base_tent(delta), raised_tent(delta));
            let plan = replace(&instance, 0, raised_tent(delta));
            Ok(Scenario {
                name: name.into(),
                params: with_params(&[("delta", delta)]),
                start: uniform_start(&instance),
                instance,
                plan: Some(plan),
                known_facts: vec![
                    fact("equilibrium welfare before", EquilibriumWelfare, 2.0 * delta, 1e-8, Reported),
                    fact("investment cost", PlanCost, 2.0 * delta, 1e-9, Reported),
                    fact("equilibrium red mass after", PlannedMass(0), 0.5, 1e-6, Trivial),
                    fact(
                        "equilibrium welfare after",
                        PlannedWelfare,
                        1.0 + 2.0 * delta,
                        1e-6,
                        Reported,
                    ),
                ],
            })
        }
        "thm2-lower-bound" => {
            let epsilon = *params.get("epsilon").ok_or(ScenarioError::MissingParam {
                scenario: name.into(),
                param: "epsilon",
            })?;
            if !(epsilon > 0.0 && epsilon <= 1.0) {
                return Err(ScenarioError::BadParam {
                    param: "epsilon",
                    value: epsilon,
                });
            }
            let instance = CityInstance::new(
                vec![
                    neighbourhood("one", vec![(0.0, 1.0), (1.0, 0.0)]),
                    neighbourhood("two", vec![(0.0, 0.0), (1.0, 0.0)]),
                ],
                1.0,
            )
            .expect("built-in instance is valid");
            let tail = epsilon / 4.0;
            let plan = replace(&instance, 0, vec![(0.0, 1.0), (1.0 - tail, tail), (1.0, tail)]);
            Ok(Scenario {
                name: name.into(),
                params: with_params(&[("epsilon", epsilon)]),
                start: uniform_start(&instance),
                instance,
                plan: Some(plan),
                known_facts: vec![
                    fact("optimal welfare", Optimum, 0.25, 1e-6, Reported),
                    fact("investment cost", PlanCost, epsilon * epsilon / 32.0, 1e-12, Reported),
                    fact("location one mass after", PlannedMass(0), 1.0, 1e-6, Reported),
                    fact("equilibrium welfare after", PlannedWelfare, tail, 1e-8, Reported),
                ],
            })
        }
        "donut" => Ok(donut_instance()),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

/// Inner-city utility `f_R`: `25 + 3x/20` up to 500, then `200 - x/5`.
pub fn donut_inner_utility() -> Vec<(f64, f64)> {
    vec![(0.0, 25.0), (500.0, 100.0), (1000.0, 0.0)]
}

/// Suburban utility `f_B`, rising with slope 3/2 to `(50, 101)`, kinked at
/// `(81, 58)` and ending at `(100, 1)`.
pub fn donut_suburb_utility() -> Vec<(f64, f64)> {
    vec![(0.0, 26.0), (50.0, 101.0), (81.0, 58.0), (100.0, 1.0)]
}

/// Improved inner-city utility `g_R`: `32 + 69x/500` up to 500, then
/// `202 - 101x/500`.
pub fn donut_improved_inner_utility() -> Vec<(f64, f64)> {
    vec![(0.0, 32.0), (500.0, 101.0), (1000.0, 0.0)]
}

/// One inner city of capacity 1000 and ten suburbs of capacity 100, with
/// `N = 1000` starting at 50% occupancy everywhere.
pub fn donut_instance() -> Scenario {
    use FactSource::*;
    use Quantity::*;
    let mut nbs = vec![neighbourhood("inner", donut_inner_utility())];
    for k in 1..=10 {
        nbs.push(neighbourhood(&format!("suburb-{k}"), donut_suburb_utility()));
    }
    let instance = CityInstance::new(nbs, 1000.0).expect("donut instance is valid");
    let start = proportional_start(&instance);
    let plan = donut_plan_for(&instance);
    let mut known_facts = vec![
        fact("inner mass at equilibrium", EquilibriumMass(0), 160.0, 0.5, Reported),
        fact("inner density at equilibrium", EquilibriumDensity(0), 0.16, 5e-4, Reported),
        fact("common payoff at equilibrium", EquilibriumPayoff(0), 49.0, 0.01, Derived),
        fact("potential at the start", StartPotential, 63_000.0, 1e-9, Derived),
        fact("investment cost", PlanCost, 2_250.0, 1e-9, Derived),
        fact("inner mass after", PlannedMass(0), 500.0, 0.5, Reported),
        fact("common payoff after", PlannedPayoff(0), 101.0, 0.01, Derived),
    ];
    for k in 1..=10 {
        known_facts.push(fact("suburb mass at equilibrium", EquilibriumMass(k), 84.0, 0.05, Reported));
        known_facts.push(fact("suburb density at equilibrium", EquilibriumDensity(k), 0.84, 5e-4, Reported));
        known_facts.push(fact("suburb payoff at equilibrium", EquilibriumPayoff(k), 49.0, 0.01, Derived));
        known_facts.push(fact("suburb mass after", PlannedMass(k), 50.0, 0.05, Reported));
        known_facts.push(fact("suburb payoff after", PlannedPayoff(k), 101.0, 0.01, Derived));
    }
    Scenario {
        name: "donut".into(),
        params: BTreeMap::new(),
        instance,
        start,
        plan: Some(plan),
        known_facts,
    }
}

fn donut_plan_for(instance: &CityInstance) -> InvestmentPlan {
    replace(instance, 0, donut_improved_inner_utility())
}

/// Replaces the inner-city utility with `g_R`.
pub fn donut_plan() -> InvestmentPlan {
    donut_instance().plan.expect("donut has a plan")
}

/// The two dynamics runs behind a scenario's facts.
#[derive(Debug, Clone)]
pub struct ScenarioRuns {
    pub before: EquilibriumReport,
    pub planned_instance: Option<CityInstance>,
    pub after: Option<EquilibriumReport>,
}

impl Scenario {
    /// Runs the default dynamics from `start` and, if there is a plan, again
    /// on the planned instance from the first equilibrium.
    pub fn run(&self, record_trace: bool) -> ScenarioRuns {
        let mut cfg = DynamicsConfig::for_instance(&self.instance);
        cfg.record_trace = record_trace;
        let before = best_response_dynamics(&self.instance, &self.start, &cfg);
        let (planned_instance, after) = match &self.plan {
            Some(plan) => {
                let planned = self.instance.apply_plan(plan).expect("scenario plan fits");
                let mut cfg = DynamicsConfig::for_instance(&planned);
                cfg.record_trace = record_trace;
                let after = best_response_dynamics(&planned, &before.allocation, &cfg);
                (Some(planned), Some(after))
            }
            None => (None, None),
        };
        ScenarioRuns {
            before,
            planned_instance,
            after,
        }
    }

    /// Recomputes every known fact with the toolkit's solvers.
    pub fn reproduce(&self) -> Result<Vec<FactCheck>, ScenarioError> {
        let runs = self.run(false);
        let mut opt = None;
        let mut checks = Vec::with_capacity(self.known_facts.len());
        for f in &self.known_facts {
            let after = || runs.after.as_ref().expect("planned facts need a plan");
            let planned = || runs.planned_instance.as_ref().expect("planned facts need a plan");
            let observed = match f.quantity {
                Quantity::EquilibriumMass(i) => runs.before.allocation[i],
                Quantity::EquilibriumDensity(i) => {
                    runs.before.allocation[i] / self.instance.capacity(i)
                }
                Quantity::EquilibriumPayoff(i) => {
                    self.instance.utility(i).value_at(runs.before.allocation[i])
                }
                Quantity::EquilibriumWelfare => runs.before.welfare,
                Quantity::Optimum | Quantity::PriceOfAnarchy => {
                    let value = match opt {
                        Some(v) => v,
                        None => {
                            let v = optimal_welfare(&self.instance)?.value;
                            opt = Some(v);
                            v
                        }
                    };
                    if f.quantity == Quantity::Optimum {
                        value
                    } else {
                        price_of_anarchy(value, runs.before.welfare).unwrap_or(f64::NAN)
                    }
                }
                Quantity::StartPotential => potential(&self.instance, &self.start),
                Quantity::PlanCost => self.plan.as_ref().map_or(0.0, |p| p.total_cost()),
                Quantity::PlannedMass(i) => after().allocation[i],
                Quantity::PlannedPayoff(i) => planned().utility(i).value_at(after().allocation[i]),
                Quantity::PlannedWelfare => after().welfare,
            };
            checks.push(FactCheck {
                label: f.label,
                expected: f.expected,
                observed,
                tolerance: f.tolerance,
                ok: (observed - f.expected).abs() <= f.tolerance,
            });
        }
        Ok(checks)
    }
}

/// A random concave utility on `[0, capacity]` with between one and six
/// pieces, peak value drawn from `peak_range`.
pub fn random_concave<R: Rng>(rng: &mut R, capacity: f64, peak_range: (f64, f64)) -> PwlFunction {
    let pieces = rng.gen_range(1..=6);
    let mut xs: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.02..0.98) * capacity).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * capacity);
    xs.insert(0, 0.0);
    xs.push(capacity);
    let mut slopes: Vec<f64> = (0..xs.len() - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut ys = vec![0.0];
    for (k, s) in slopes.iter().enumerate() {
        ys.push(ys[k] + s * (xs[k + 1] - xs[k]));
    }
    let low = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let high = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak = rng.gen_range(peak_range.0..=peak_range.1);
    // lift so the minimum sits somewhere in [0, peak/2], then rescale the peak
    let floor = rng.gen_range(0.0..0.5) * peak;
    let span = high - low;
    let points = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let v = if span > 0.0 {
                floor + (y - low) / span * (peak - floor)
            } else {
                peak
            };
            (x, v.max(0.0))
        })
        .collect();
    PwlFunction::new(points).expect("generator produces concave functions")
}

/// `n` random concave tents through `(0, ℓ)`, `(σ, h)`, `(u, ℓ')` with
/// `ℓ, ℓ' <= h`, and `N` uniform in `[max u, sum u]`. Deterministic in `seed`.
pub fn random_instance(
    seed: u64,
    n: usize,
    capacity_range: (f64, f64),
    peak_range: (f64, f64),
) -> CityInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nbs = Vec::with_capacity(n);
    for i in 0..n {
        let u = rng.gen_range(capacity_range.0..=capacity_range.1);
        let h = rng.gen_range(peak_range.0..=peak_range.1);
        let shape: f64 = rng.gen_range(0.0..1.0);
        let left = rng.gen_range(0.0..=h);
        let right = rng.gen_range(0.0..=h);
        let points = if shape < 0.1 {
            vec![(0.0, h), (u, right)]
        } else if shape < 0.2 {
            vec![(0.0, left), (u, h)]
        } else {
            let sigma = rng.gen_range(0.05..0.95) * u;
            vec![(0.0, left), (sigma, h), (u, right)]
        };
        nbs.push(neighbourhood(&format!("n{i}"), points));
    }
    let max = nbs.iter().map(|n| n.capacity).fold(0.0, f64::max);
    let total: f64 = nbs.iter().map(|n| n.capacity).sum();
    let population = if total > max { rng.gen_range(max..=total) } else { max };
    CityInstance::new(nbs, population).expect("generator produces valid instances")
}
