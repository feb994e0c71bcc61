//! Optimal social welfare.
//!
//! `x f(x)` is piecewise quadratic and generally not concave, so the optimum
//! is bracketed by a grid dynamic program (a lower bound), polished by exact
//! pairwise transfers, and capped by a greedy peak-utility bound.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{self, GridError};
use crate::model::{welfare_of, Allocation, CityInstance};
use crate::pwl::ABS_TOL;

/// Largest `N / grid` the dynamic program accepts.
pub const MAX_DP_CELLS: f64 = 1e7;

/// Stop refining once a sweep gains less than this.
const REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("grid {grid} needs {cells:.3e} cells (limit {MAX_DP_CELLS:e})")]
    GridTooFine { grid: f64, cells: f64 },
    #[error("grid {0} must be positive and finite")]
    BadGrid(f64),
    #[error("no grid-feasible allocation at grid {0}; use a finer grid")]
    NoGridAllocation(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub value: f64,
    pub allocation: Allocation,
    pub grid: f64,
    pub is_refined: bool,
}

/// Default dynamic-program grid, `N / 10^4`.
pub fn default_grid(instance: &CityInstance) -> f64 {
    instance.population() / 1e4
}

/// Best allocation with every location but the largest on multiples of
/// `grid`; the largest location takes the remainder.
pub fn opt_dp(instance: &CityInstance, grid: f64) -> Result<OptResult, OptError> {
    if !(grid.is_finite() && grid > 0.0) {
        return Err(OptError::BadGrid(grid));
    }
    let population = instance.population();
    let cells_f = population / grid;
    let n = instance.len();
    if cells_f > MAX_DP_CELLS || cells_f * n as f64 > 10.0 * MAX_DP_CELLS {
        return Err(OptError::GridTooFine {
            grid,
            cells: cells_f,
        });
    }
    let cells = (cells_f + 1e-9).floor() as usize;
    let rest = instance.largest_location();
    let free: Vec<usize> = (0..n).filter(|&i| i != rest).collect();

    // best[s] = best welfare of the free locations seen so far using s cells
    let mut best = vec![f64::NEG_INFINITY; cells + 1];
    best[0] = 0.0;
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(free.len());
    for &i in &free {
        let f = instance.utility(i);
        let kmax = ((instance.capacity(i) / grid + 1e-9).floor() as usize).min(cells);
        let gains: Vec<f64> = (0..=kmax)
            .map(|k| {
                let x = k as f64 * grid;
                x * f.value_at(x)
            })
            .collect();
        let mut next = vec![f64::NEG_INFINITY; cells + 1];
        let mut pick = vec![0u32; cells + 1];
        for (s, &base) in best.iter().enumerate() {
            if base == f64::NEG_INFINITY {
                continue;
            }
            for (k, &gain) in gains.iter().enumerate().take(cells - s + 1) {
                let v = base + gain;
                if v > next[s + k] {
                    next[s + k] = v;
                    pick[s + k] = k as u32;
                }
            }
        }
        best = next;
        choice.push(pick);
    }

    let f_rest = instance.utility(rest);
    let cap_rest = instance.capacity(rest);
    let slack = ABS_TOL * population.max(1.0);
    let mut top: Option<(f64, usize, f64)> = None;
    for (s, &v) in best.iter().enumerate() {
        if v == f64::NEG_INFINITY {
            continue;
        }
        let remainder = population - s as f64 * grid;
        if remainder < -slack || remainder > cap_rest + slack {
            continue;
        }
        let remainder = remainder.clamp(0.0, cap_rest);
        let total = v + remainder * f_rest.value_at(remainder);
        if top.is_none_or(|(t, _, _)| total > t) {
            top = Some((total, s, remainder));
        }
    }
    let (_, mut s, remainder) = top.ok_or(OptError::NoGridAllocation(grid))?;
    let mut x = vec![0.0; n];
    x[rest] = remainder;
    for (slot, &i) in free.iter().enumerate().rev() {
        let k = choice[slot][s] as usize;
        x[i] = k as f64 * grid;
        s -= k;
    }
    Ok(OptResult {
        value: welfare_of(instance, &x),
        allocation: Allocation::from_vec_unchecked(x),
        grid,
        is_refined: false,
    })
}

/// Best transfer `t` of mass from `j` to `i` (negative `t` moves `i -> j`),
/// found exactly: along the transfer line the welfare is quadratic between
/// consecutive breakpoints of `f_i` and `f_j`.
fn best_transfer(instance: &CityInstance, x: &[f64], i: usize, j: usize) -> (f64, f64) {
    let (fi, fj) = (instance.utility(i), instance.utility(j));
    let (xi, xj) = (x[i], x[j]);
    let (ui, uj) = (instance.capacity(i), instance.capacity(j));
    let lo = (-xi).max(xj - uj);
    let hi = (ui - xi).min(xj);
    let pair_welfare = |t: f64| {
        let a = (xi + t).clamp(0.0, ui);
        let b = (xj - t).clamp(0.0, uj);
        a * fi.value_at(a) + b * fj.value_at(b)
    };
    let base = pair_welfare(0.0);
    if hi - lo <= 0.0 {
        return (0.0, 0.0);
    }

    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(fi.breakpoints().iter().map(|p| p.0 - xi));
    cuts.extend(fj.breakpoints().iter().map(|p| xj - p.0));
    cuts.retain(|&t| t >= lo && t <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut best = (0.0, base);
    let mut consider = |t: f64| {
        let v = pair_welfare(t);
        if v > best.1 {
            best = (t, v);
        }
    };
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        consider(a);
        consider(b);
        let mid = 0.5 * (a + b);
        let (ci, si) = fi.piece_at(xi + mid);
        let (cj, sj) = fj.piece_at(xj - mid);
        // w(t) = (xi+t)(ci + si(xi+t)) + (xj-t)(cj + sj(xj-t))
        // w'(t) = ci + 2 si (xi+t) - cj - 2 sj (xj-t)
        let curvature = si + sj;
        if curvature < 0.0 {
            let t = (cj + 2.0 * sj * xj - ci - 2.0 * si * xi) / (2.0 * curvature);
            if t > a && t < b {
                consider(t);
            }
        }
    }
    (best.0, best.1 - base)
}

/// Polishes `coarse` with exact pairwise transfers until no transfer gains
/// more than `1e-12`. Never decreases the welfare.
pub fn opt_refine(instance: &CityInstance, coarse: &OptResult) -> OptResult {
    let n = instance.len();
    let mut x = coarse.allocation.as_slice().to_vec();
    let mut value = welfare_of(instance, &x);
    for _sweep in 0..10_000 {
        let mut improved = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (t, gain) = best_transfer(instance, &x, i, j);
                if gain > REFINE_TOL {
                    let mut y = x.clone();
                    y[i] = (y[i] + t).clamp(0.0, instance.capacity(i));
                    y[j] = (y[j] - t).clamp(0.0, instance.capacity(j));
                    let v = welfare_of(instance, &y);
                    if v > value {
                        x = y;
                        value = v;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    OptResult {
        value,
        allocation: Allocation::from_vec_unchecked(x),
        grid: coarse.grid,
        is_refined: true,
    }
}

/// `opt_dp` at the default grid followed by `opt_refine`.
pub fn optimal_welfare(instance: &CityInstance) -> Result<OptResult, OptError> {
    let coarse = opt_dp(instance, default_grid(instance))?;
    Ok(opt_refine(instance, &coarse))
}

/// Greedy bound: fill locations in decreasing order of peak utility `h_i` and
/// value each unit of mass at its location's peak.
pub fn welfare_upper_bound_greedy(instance: &CityInstance) -> f64 {
    let mut order: Vec<(f64, f64)> = instance
        .neighbourhoods()
        .iter()
        .map(|n| (n.utility.peak_profile().h, n.capacity))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = instance.population();
    let mut bound = 0.0;
    for (h, u) in order {
        let m = left.min(u);
        bound += m * h;
        left -= m;
        if left <= 0.0 {
            break;
        }
    }
    bound
}

/// Exhaustive scan of the grid simplex (`n <= 3`), returning the best welfare
/// and where it is attained.
pub fn opt_bruteforce(instance: &CityInstance, resolution: f64) -> Result<(f64, Allocation), OptError> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    grid::for_each_allocation(instance, resolution, |x| {
        let v = welfare_of(instance, x);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, x.to_vec()));
        }
    })?;
    let (v, x) = best.ok_or(OptError::NoGridAllocation(resolution))?;
    Ok((v, Allocation::from_vec_unchecked(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Neighbourhood;
    use crate::pwl::PwlFunction;
    use approx::assert_abs_diff_eq;

    fn nb(name: &str, pts: &[(f64, f64)]) -> Neighbourhood {
        let utility = PwlFunction::new(pts.to_vec()).unwrap();
        Neighbourhood {
            name: name.into(),
            capacity: utility.capacity(),
            utility,
        }
    }

    fn poa_tents(d: f64) -> CityInstance {
        CityInstance::new(
            vec![
                nb("red", &[(0.0, d), (0.5, 1.0), (1.0, 0.0)]),
                nb("blue", &[(0.0, 3.0 * d), (0.5, 1.0 + 2.0 * d), (1.0, 2.0 * d)]),
            ],
            1.0,
        )
        .unwrap()
    }

    fn line_instance() -> CityInstance {
        CityInstance::new(
            vec![
                nb("one", &[(0.0, 1.0), (1.0, 0.0)]),
                nb("two", &[(0.0, 0.0), (1.0, 0.0)]),
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn dp_on_two_tent_instance() {
        let r = opt_dp(&poa_tents(0.01), 1e-3).unwrap();
        assert!((r.value - 1.01).abs() <= 2e-3);
        assert!((r.allocation[0] - 0.5).abs() < 0.01);
        assert!(!r.is_refined);
    }

    #[test]
    fn dp_on_line_instance() {
        let r = opt_dp(&line_instance(), 1e-3).unwrap();
        assert!((r.value - 0.25).abs() <= 2e-3);
        assert!((r.allocation[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn dp_forced_full() {
        let inst = CityInstance::new(
            vec![
                nb("a", &[(0.0, 1.0), (1.0, 0.5)]),
                nb("b", &[(0.0, 2.0), (2.0, 0.25)]),
            ],
            3.0,
        )
        .unwrap();
        let r = opt_dp(&inst, 0.01).unwrap();
        assert_eq!(r.value, 1.0 * 0.5 + 2.0 * 0.25);
    }

    #[test]
    fn dp_grid_budget() {
        assert!(matches!(opt_dp(&line_instance(), 1e-8), Err(OptError::GridTooFine { .. })));
        assert!(matches!(opt_dp(&line_instance(), -1.0), Err(OptError::BadGrid(_))));
    }

    #[test]
    fn refine_is_exact_on_two_tent_instances() {
        let inst = poa_tents(0.01);
        let r = opt_refine(&inst, &opt_dp(&inst, default_grid(&inst)).unwrap());
        assert_abs_diff_eq!(r.value, 1.01, epsilon = 1e-12);
        assert!(r.is_refined);

        // a deliberately coarse start still lands on the optimum
        let coarse = opt_dp(&line_instance(), 0.3).unwrap();
        let r = opt_refine(&line_instance(), &coarse);
        assert_abs_diff_eq!(r.value, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r.allocation[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn refine_keeps_optimal_corner() {
        let inst = CityInstance::new(
            vec![
                nb("a", &[(0.0, 1.0), (1.0, 1.0)]),
                nb("b", &[(0.0, 0.0), (1.0, 0.0)]),
            ],
            1.0,
        )
        .unwrap();
        let start = OptResult {
            value: 1.0,
            allocation: Allocation::new(&inst, vec![1.0, 0.0]).unwrap(),
            grid: 0.1,
            is_refined: false,
        };
        let r = opt_refine(&inst, &start);
        assert_eq!(r.allocation, start.allocation);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn greedy_bounds() {
        assert_abs_diff_eq!(welfare_upper_bound_greedy(&poa_tents(0.01)), 1.02, epsilon = 1e-15);
        let single = CityInstance::new(vec![nb("a", &[(0.0, 0.3), (0.5, 0.8), (1.0, 0.2)])], 1.0)
            .unwrap();
        assert_eq!(welfare_upper_bound_greedy(&single), 0.8);
    }

    #[test]
    fn bruteforce_matches_known_optima() {
        let ne_tents = CityInstance::new(
            vec![
                nb("red", &[(0.0, 0.01), (0.5, 1.0), (1.0, 0.0)]),
                nb("blue", &[(0.0, 0.01), (0.5, 1.0), (1.0, 0.0)]),
            ],
            1.0,
        )
        .unwrap();
        assert!((opt_bruteforce(&ne_tents, 1e-4).unwrap().0 - 1.0).abs() <= 1e-3);
        assert!((opt_bruteforce(&line_instance(), 1e-4).unwrap().0 - 0.25).abs() <= 1e-3);
        let zero = CityInstance::new(
            vec![
                nb("a", &[(0.0, 0.0), (1.0, 0.0)]),
                nb("b", &[(0.0, 0.0), (1.0, 0.0)]),
            ],
            1.5,
        )
        .unwrap();
        assert_eq!(opt_bruteforce(&zero, 1e-3).unwrap().0, 0.0);
    }
}
