//! Solvers and planners for the concave-utility bounded-neighbourhood game.
//!
//! A city is a set of neighbourhoods, each with a capacity `u_i` and a
//! concave piecewise-linear utility `f_i` on `[0, u_i]`, shared by a
//! continuum population of total mass `N`. The crate computes Nash
//! equilibria (by best-response dynamics and, for up to three
//! neighbourhoods, by exhaustive grid search), the optimal social welfare,
//! and low-cost targeted-investment plans that lift every equilibrium to a
//! chosen fraction of a welfare benchmark.

pub mod equilibrium;
pub mod grid;
pub mod io;
pub mod model;
pub mod opt;
pub mod planner;
pub mod pwl;
pub mod scenarios;

pub use equilibrium::{
    best_response_dynamics, enumerate_equilibria_grid, is_equilibrium, potential, regret,
    worst_equilibrium_welfare, DynamicsConfig, EquilibriumError, EquilibriumReport, Regret,
    TracePoint, WorstEquilibrium,
};
pub use model::{
    price_of_anarchy, welfare, Allocation, CityInstance, InstanceError, InvestmentPlan,
    ModelError, Neighbourhood, PlanEntry, Violation,
};
pub use opt::{
    opt_bruteforce, opt_dp, opt_refine, optimal_welfare, welfare_upper_bound_greedy, OptError,
    OptResult,
};
pub use planner::{
    certify, find_critical, plan_investment, select_k_star, Branch, Certificate, PlannerDiagnostics,
    PlannerError, COST_FACTOR, PHI,
};
pub use pwl::{symmetric_difference_area, PeakProfile, PwlError, PwlFunction, RudimentaryResult};
pub use scenarios::{builtin, donut_instance, donut_plan, random_instance, Scenario};
