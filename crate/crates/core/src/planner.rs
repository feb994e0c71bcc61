//! Targeted-investment planning.
//!
//! Given a welfare benchmark `W` (any lower bound on the optimum) and a
//! fraction `ε`, the planner raises the low flanks of a few utilities to
//! `τ_i = ε_i h_i` so that every equilibrium of the modified game has welfare
//! at least `ε W`, for a total cost of at most `(1 + φ)/2 · ε² · W`.
//!
//! Location selection has two branches. If some location has `u h >= φ W`
//! (a critical location) only that one is raised, with the target scaled
//! down by `λ = u h / W`. Otherwise locations are taken in decreasing order
//! of peak `h` until their `sum u h` reaches `W`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{worst_equilibrium_welfare, EquilibriumError};
use crate::model::{CityInstance, InvestmentPlan, ModelError, PlanEntry};
use crate::pwl::{symmetric_difference_area, PwlError, PwlFunction};

/// Golden-ratio conjugate `(√5 - 1)/2`.
pub const PHI: f64 = 0.618_033_988_749_894_9;

/// Cost constant `(1 + φ)/2 ≈ 0.809`.
pub const COST_FACTOR: f64 = (1.0 + PHI) / 2.0;

/// Slack on the cost comparison.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("epsilon {0} must lie in (0, 1]")]
    EpsilonOutOfRange(f64),
    #[error("benchmark welfare {0} must be positive")]
    NonPositiveBenchmark(f64),
    #[error("sum of u_i h_i = {total} is below the benchmark {benchmark}; the benchmark overestimates the optimum")]
    NoPrefix { total: f64, benchmark: f64 },
    #[error(transparent)]
    Pwl(#[from] PwlError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Critical,
    NoCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerDiagnostics {
    pub phi: f64,
    pub branch: Branch,
    pub lambda: f64,
    /// Number of invested locations in the no-critical branch.
    pub k_star: Option<usize>,
    /// `ε / λ` in the critical branch.
    pub epsilon_star: Option<f64>,
    /// The critical location, if any.
    pub critical: Option<usize>,
    pub benchmark: f64,
    pub epsilon: f64,
    pub total_cost: f64,
    pub cost_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub epsilon: f64,
    pub benchmark: f64,
    pub total_cost: f64,
    pub cost_bound: f64,
    pub welfare_floor: f64,
    pub worst_eq_welfare: f64,
    pub worst_eq_allocation: Vec<f64>,
    pub equilibria_inspected: usize,
    /// `resolution · max slope · N` of the modified instance.
    pub tolerance: f64,
    pub cost_ok: bool,
    pub welfare_ok: bool,
    pub heuristic_equilibria: bool,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.cost_ok && self.welfare_ok
    }
}

fn check_benchmark(benchmark: f64) -> Result<(), PlannerError> {
    if benchmark.is_finite() && benchmark > 0.0 {
        Ok(())
    } else {
        Err(PlannerError::NonPositiveBenchmark(benchmark))
    }
}

fn peak_mass(instance: &CityInstance, i: usize) -> f64 {
    instance.capacity(i) * instance.utility(i).peak_profile().h
}

/// Location with the largest `u h` among those with `u h >= φ W`, with
/// `λ = u h / W`. Ties go to the lowest index.
pub fn find_critical(instance: &CityInstance, benchmark: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..instance.len() {
        let uh = peak_mass(instance, i);
        if uh >= PHI * benchmark && best.is_none_or(|(_, b)| uh > b) {
            best = Some((i, uh));
        }
    }
    best.map(|(i, uh)| (i, uh / benchmark))
}

/// Orders locations by decreasing `h` (lower index first on ties) and returns
/// the shortest prefix length whose `sum u h` reaches `W`, the ratio
/// `λ = prefix sum / W`, and the ordering.
pub fn select_k_star(
    instance: &CityInstance,
    benchmark: f64,
) -> Result<(usize, f64, Vec<usize>), PlannerError> {
    check_benchmark(benchmark)?;
    let peaks: Vec<f64> = (0..instance.len())
        .map(|i| instance.utility(i).peak_profile().h)
        .collect();
    let mut order: Vec<usize> = (0..instance.len()).collect();
    order.sort_by(|&a, &b| peaks[b].total_cmp(&peaks[a]).then(a.cmp(&b)));
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        total += peak_mass(instance, i);
        if total >= benchmark {
            return Ok((k + 1, total / benchmark, order));
        }
    }
    Err(PlannerError::NoPrefix { total, benchmark })
}

/// Rudimentary transform at `fraction · h`. A fraction above 1 (possible in
/// the critical branch when `λ < ε`) lifts the whole utility to the constant
/// `τ`, which costs `τ u - ∫ f <= fraction²/2 · u h` because `∫ f >= u h / 2`.
fn rudimentary_entry(instance: &CityInstance, index: usize, fraction: f64) -> Result<PlanEntry, PlannerError> {
    let f = instance.utility(index);
    let peak = f.peak_profile();
    let tau = fraction * peak.h;
    if fraction > 1.0 {
        let u = f.capacity();
        let g = PwlFunction::new(vec![(0.0, tau), (u, tau)])?;
        let cost = symmetric_difference_area(f, &g)?;
        return Ok(PlanEntry {
            index,
            tau: Some(tau),
            alpha: Some(peak.sigma),
            beta: Some(peak.sigma),
            cost,
            g,
        });
    }
    let r = f.raise_to_target(tau)?;
    Ok(PlanEntry {
        index,
        tau: Some(r.tau),
        alpha: Some(r.alpha),
        beta: Some(r.beta),
        cost: r.cost,
        g: r.g,
    })
}

/// Synthesizes the investment plan for `(ε, W)`.
pub fn plan_investment(
    instance: &CityInstance,
    epsilon: f64,
    benchmark: f64,
) -> Result<(InvestmentPlan, PlannerDiagnostics), PlannerError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(PlannerError::EpsilonOutOfRange(epsilon));
    }
    check_benchmark(benchmark)?;
    let cost_bound = COST_FACTOR * epsilon * epsilon * benchmark;

    if let Some((index, lambda)) = find_critical(instance, benchmark) {
        let epsilon_star = epsilon / lambda;
        let plan = InvestmentPlan::new(vec![rudimentary_entry(instance, index, epsilon_star)?]);
        let diagnostics = PlannerDiagnostics {
            phi: PHI,
            branch: Branch::Critical,
            lambda,
            k_star: None,
            epsilon_star: Some(epsilon_star),
            critical: Some(index),
            benchmark,
            epsilon,
            total_cost: plan.total_cost(),
            cost_bound,
        };
        return Ok((plan, diagnostics));
    }

    let (k_star, lambda, order) = select_k_star(instance, benchmark)?;
    let mut chosen = order[..k_star].to_vec();
    chosen.sort_unstable();
    let entries = chosen
        .into_iter()
        .map(|i| rudimentary_entry(instance, i, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = InvestmentPlan::new(entries);
    let diagnostics = PlannerDiagnostics {
        phi: PHI,
        branch: Branch::NoCritical,
        lambda,
        k_star: Some(k_star),
        epsilon_star: None,
        critical: None,
        benchmark,
        epsilon,
        total_cost: plan.total_cost(),
        cost_bound,
    };
    Ok((plan, diagnostics))
}

/// Checks a plan's cost against `(1 + φ)/2 · ε² · W` and the worst
/// equilibrium of the modified game against `ε W`.
///
/// The cost is the larger of the plan's declared total and the area
/// recomputed from its replacement functions. The welfare check allows
/// `resolution · max slope · N`, the welfare a grid-resolution near
/// equilibrium can lose.
pub fn certify(
    instance: &CityInstance,
    plan: &InvestmentPlan,
    epsilon: f64,
    benchmark: f64,
    resolution: f64,
) -> Result<Certificate, PlannerError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(PlannerError::EpsilonOutOfRange(epsilon));
    }
    check_benchmark(benchmark)?;
    let total_cost = plan.total_cost().max(plan.recomputed_cost(instance)?);
    let cost_bound = COST_FACTOR * epsilon * epsilon * benchmark;
    let modified = instance.apply_plan(plan)?;
    let worst = worst_equilibrium_welfare(&modified, resolution)?;
    let tolerance = resolution * modified.max_abs_slope() * modified.population();
    let welfare_floor = epsilon * benchmark;
    Ok(Certificate {
        epsilon,
        benchmark,
        total_cost,
        cost_bound,
        welfare_floor,
        worst_eq_welfare: worst.welfare,
        worst_eq_allocation: worst.allocation.into_inner(),
        equilibria_inspected: worst.count,
        tolerance,
        cost_ok: total_cost <= cost_bound + COST_TOL,
        welfare_ok: worst.welfare >= welfare_floor - tolerance,
        heuristic_equilibria: worst.heuristic,
    })
}
