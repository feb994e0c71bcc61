//! Nash-equilibrium machinery.
//!
//! Agents are infinitesimal, so a mover from `i` to `j` compares `f_i(x_i)`
//! with `f_j(x_j)` at the current loads. An allocation is an equilibrium when
//! no occupied location pays less than any location with spare room.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{self, GridError};
use crate::model::{welfare_of, Allocation, CityInstance};

/// Relative mass below which a location counts as empty (or full).
const MASS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no equilibrium found; refine the grid or add starts")]
    EmptyEquilibriumSet,
}

/// Largest payoff gain available to a mover, with the pair that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regret {
    pub gap: f64,
    /// `(source, target)`; `None` when no location has both a resident and
    /// an alternative with spare room.
    pub pair: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsConfig {
    pub initial_step: f64,
    pub step_decay: f64,
    pub regret_tol: f64,
    pub max_iters: usize,
    pub oscillation_window: usize,
    pub record_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub allocation: Vec<f64>,
    pub welfare: f64,
    pub max_regret: f64,
    pub potential: f64,
    /// Step size in force when this state was left.
    pub step: f64,
    /// Mass actually moved out of this state (0 for the final state).
    pub moved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub allocation: Allocation,
    pub welfare: f64,
    pub max_regret: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

/// Minimum welfare over a discovered equilibrium set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstEquilibrium {
    pub welfare: f64,
    pub allocation: Allocation,
    /// Number of equilibria (grid points or converged runs) inspected.
    pub count: usize,
    /// Set when the set came from multi-start dynamics rather than the grid.
    pub heuristic: bool,
}

impl DynamicsConfig {
    /// Defaults: step `N/1000`, decay 0.5, tolerance `1e-7 · max h`,
    /// `10^6` iterations, oscillation window 8.
    pub fn for_instance(instance: &CityInstance) -> Self {
        DynamicsConfig {
            initial_step: instance.population() / 1000.0,
            step_decay: 0.5,
            regret_tol: 1e-7 * instance.max_peak(),
            max_iters: 1_000_000,
            oscillation_window: 8,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

fn occupied(x: f64, population: f64) -> bool {
    x > MASS_EPS * population.max(1.0)
}

fn has_room(x: f64, capacity: f64) -> bool {
    x < capacity - MASS_EPS * capacity.max(1.0)
}

fn regret_from_payoffs(instance: &CityInstance, x: &[f64], payoffs: &[f64]) -> Regret {
    let population = instance.population();
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, &pi) in payoffs.iter().enumerate() {
        if !occupied(x[i], population) {
            continue;
        }
        for (j, &pj) in payoffs.iter().enumerate() {
            if j == i || !has_room(x[j], instance.capacity(j)) {
                continue;
            }
            let diff = pj - pi;
            if best.is_none_or(|(b, _, _)| diff > b) {
                best = Some((diff, i, j));
            }
        }
    }
    match best {
        Some((diff, i, j)) => Regret {
            gap: diff.max(0.0),
            pair: Some((i, j)),
        },
        None => Regret {
            gap: 0.0,
            pair: None,
        },
    }
}

pub(crate) fn regret_of(instance: &CityInstance, x: &[f64]) -> Regret {
    regret_from_payoffs(instance, x, &instance.payoffs(x))
}

/// Largest gain `f_j(x_j) - f_i(x_i)` over occupied `i` and non-full `j != i`,
/// clamped at zero. Ties go to the lowest `(source, target)` pair.
pub fn regret(instance: &CityInstance, x: &Allocation) -> Regret {
    regret_of(instance, x.as_slice())
}

pub fn is_equilibrium(instance: &CityInstance, x: &Allocation, eta: f64) -> bool {
    regret(instance, x).gap <= eta
}

/// Rosenthal-style potential `sum_i ∫_0^{x_i} f_i`.
pub fn potential(instance: &CityInstance, x: &Allocation) -> f64 {
    potential_of(instance, x.as_slice())
}

fn potential_of(instance: &CityInstance, x: &[f64]) -> f64 {
    instance
        .neighbourhoods()
        .iter()
        .zip(x)
        .map(|(n, &xi)| n.utility.primitive(xi))
        .sum()
}

/// Discrete best-response dynamics.
///
/// Each iteration moves `m = min(step, x_s, u_t - x_t)` from the current
/// max-regret source `s` to its target `t`. When a move reverses a pair seen
/// within the last `oscillation_window` moves the step decays; after a full
/// window without reversals it grows back towards `initial_step`.
pub fn best_response_dynamics(
    instance: &CityInstance,
    start: &Allocation,
    config: &DynamicsConfig,
) -> EquilibriumReport {
    let mut x = start.as_slice().to_vec();
    let mut step = config.initial_step;
    let mut recent: VecDeque<(usize, usize)> = VecDeque::with_capacity(config.oscillation_window + 1);
    let mut calm = 0usize;
    let mut trace = config.record_trace.then(Vec::new);
    let mut best = (f64::INFINITY, x.clone());
    let mut iterations = 0;

    loop {
        let payoffs = instance.payoffs(&x);
        let r = regret_from_payoffs(instance, &x, &payoffs);
        if r.gap < best.0 {
            best = (r.gap, x.clone());
        }
        let done = r.gap <= config.regret_tol || r.pair.is_none();
        if done || iterations >= config.max_iters {
            if let Some(t) = trace.as_mut() {
                t.push(TracePoint {
                    iteration: iterations,
                    allocation: x.clone(),
                    welfare: welfare_of(instance, &x),
                    max_regret: r.gap,
                    potential: potential_of(instance, &x),
                    step,
                    moved: 0.0,
                });
            }
            let (max_regret, x) = if done { (r.gap, x) } else { best };
            return EquilibriumReport {
                welfare: welfare_of(instance, &x),
                allocation: Allocation::from_vec_unchecked(x),
                max_regret,
                converged: done,
                iterations,
                trace,
            };
        }

        let (s, t) = r.pair.expect("checked above");
        if recent.contains(&(t, s)) {
            step *= config.step_decay;
            calm = 0;
        } else {
            calm += 1;
            if calm >= config.oscillation_window && step < config.initial_step {
                step = (step / config.step_decay).min(config.initial_step);
                calm = 0;
            }
        }
        let room = instance.capacity(t) - x[t];
        let m = step.min(x[s]).min(room);

        if let Some(tr) = trace.as_mut() {
            tr.push(TracePoint {
                iteration: iterations,
                allocation: x.clone(),
                welfare: welfare_of(instance, &x),
                max_regret: r.gap,
                potential: potential_of(instance, &x),
                step,
                moved: m,
            });
        }

        x[s] = if m == x[s] { 0.0 } else { x[s] - m };
        x[t] = if m == room { instance.capacity(t) } else { x[t] + m };
        recent.push_back((s, t));
        if recent.len() > config.oscillation_window {
            recent.pop_front();
        }
        iterations += 1;
    }
}

/// All grid allocations whose regret is at most `n · resolution · L`, where
/// `L` is the largest absolute utility slope of the instance. The remainder
/// location can sit `(n - 1) · resolution` away from a true equilibrium, so
/// a pair's payoff gap can shift by up to `n · resolution · L`.
pub fn enumerate_equilibria_grid(
    instance: &CityInstance,
    resolution: f64,
) -> Result<Vec<Allocation>, EquilibriumError> {
    let eta = grid_tolerance(instance, resolution);
    let mut found = Vec::new();
    grid::for_each_allocation(instance, resolution, |x| {
        if regret_of(instance, x).gap <= eta {
            found.push(Allocation::from_vec_unchecked(x.to_vec()));
        }
    })?;
    Ok(found)
}

pub fn grid_tolerance(instance: &CityInstance, resolution: f64) -> f64 {
    instance.len() as f64 * resolution * instance.max_abs_slope()
}

/// Groups allocations into clusters: two allocations share a cluster when a
/// chain of allocations at max-coordinate distance `<= radius` joins them.
pub fn cluster_allocations(points: &[Allocation], radius: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let key = |a: &Allocation| -> Vec<i64> {
        a.as_slice().iter().map(|v| (v / radius).floor() as i64).collect()
    };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    for (i, p) in points.iter().enumerate() {
        let base = key(p);
        let dims = base.len();
        for code in 0..3usize.pow(dims as u32) {
            let mut c = code;
            let neighbour: Vec<i64> = base
                .iter()
                .map(|&b| {
                    let off = (c % 3) as i64 - 1;
                    c /= 3;
                    b + off
                })
                .collect();
            if let Some(members) = cells.get(&neighbour) {
                for &j in members {
                    if j != i && p.max_distance(&points[j]) <= radius {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Starting points for multi-start dynamics: one "fill this location first"
/// corner per location, the uniform and proportional splits, and `random`
/// seeded draws.
pub fn multistart_points(instance: &CityInstance, random: usize, seed: u64) -> Vec<Allocation> {
    let n = instance.len();
    let caps = instance.capacities();
    let population = instance.population();
    let mut starts = Vec::new();
    for first in 0..n {
        let order = std::iter::once(first).chain((0..n).filter(move |&i| i != first));
        starts.push(fill_in_order(&caps, population, order));
    }
    starts.push(uniform_start(instance));
    starts.push(proportional_start(instance));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        starts.push(water_fill(&caps, population, &weights));
    }
    starts
}

fn fill_in_order(caps: &[f64], population: f64, order: impl Iterator<Item = usize>) -> Allocation {
    let mut x = vec![0.0; caps.len()];
    let mut left = population;
    for i in order {
        let m = left.min(caps[i]);
        x[i] = m;
        left -= m;
    }
    Allocation::from_vec_unchecked(x)
}

/// Splits `population` proportionally to `weights`, redistributing whatever
/// overflows a capacity among the locations with room.
fn water_fill(caps: &[f64], population: f64, weights: &[f64]) -> Allocation {
    let n = caps.len();
    let mut x = vec![0.0; n];
    let mut open: Vec<usize> = (0..n).collect();
    let mut left = population;
    while left > MASS_EPS * population.max(1.0) && !open.is_empty() {
        let total: f64 = open.iter().map(|&i| weights[i].max(1e-12)).sum();
        let mut next = Vec::new();
        let mut placed = 0.0;
        for &i in &open {
            let share = left * weights[i].max(1e-12) / total;
            let room = caps[i] - x[i];
            if share >= room {
                x[i] = caps[i];
                placed += room;
            } else {
                x[i] += share;
                placed += share;
                next.push(i);
            }
        }
        left -= placed;
        if next.len() == open.len() {
            break;
        }
        open = next;
    }
    Allocation::from_vec_unchecked(x)
}

/// Equal split, capped by capacities.
pub fn uniform_start(instance: &CityInstance) -> Allocation {
    let n = instance.len();
    water_fill(&instance.capacities(), instance.population(), &vec![1.0; n])
}

/// `x_i = N u_i / sum u`.
pub fn proportional_start(instance: &CityInstance) -> Allocation {
    let caps = instance.capacities();
    let total: f64 = caps.iter().sum();
    let population = instance.population();
    Allocation::from_vec_unchecked(caps.iter().map(|u| population * u / total).collect())
}

/// Minimum welfare over the equilibrium set: the grid oracle for `n <= 3`,
/// multi-start dynamics (flagged heuristic) otherwise.
pub fn worst_equilibrium_welfare(
    instance: &CityInstance,
    resolution: f64,
) -> Result<WorstEquilibrium, EquilibriumError> {
    if instance.len() <= grid::MAX_GRID_LOCATIONS {
        let eqs = enumerate_equilibria_grid(instance, resolution)?;
        let count = eqs.len();
        let (welfare, allocation) = eqs
            .into_iter()
            .map(|a| (welfare_of(instance, a.as_slice()), a))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .ok_or(EquilibriumError::EmptyEquilibriumSet)?;
        return Ok(WorstEquilibrium {
            welfare,
            allocation,
            count,
            heuristic: false,
        });
    }
    let config = DynamicsConfig::for_instance(instance);
    let reports: Vec<EquilibriumReport> = multistart_points(instance, 8, 0x5eed)
        .par_iter()
        .map(|start| best_response_dynamics(instance, start, &config))
        .filter(|r| r.converged)
        .collect();
    let count = reports.len();
    let worst = reports
        .into_iter()
        .min_by(|a, b| a.welfare.total_cmp(&b.welfare))
        .ok_or(EquilibriumError::EmptyEquilibriumSet)?;
    Ok(WorstEquilibrium {
        welfare: worst.welfare,
        allocation: worst.allocation,
        count,
        heuristic: true,
    })
}
