//! Exhaustive walks over the grid simplex of small instances.
//!
//! A grid allocation has every location but one on its axis
//! `{0, r, 2r, ...} ∪ {u_i}`, with the remaining location absorbing whatever
//! mass is left so that the allocation sums to `N` exactly. The walk first
//! puts the remainder at the largest-capacity location, then at each other
//! location, so allocations where some location is exactly full are reached
//! even when the leftover mass is off the grid.

use thiserror::Error;

use crate::model::CityInstance;
use crate::pwl::ABS_TOL;

/// Enumeration is restricted to at most this many locations.
pub const MAX_GRID_LOCATIONS: usize = 3;

/// Upper bound on the number of grid points a single walk may visit.
pub const MAX_GRID_POINTS: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid enumeration supports at most {MAX_GRID_LOCATIONS} locations, instance has {0}")]
    InstanceTooLarge(usize),
    #[error("resolution {0} must be positive and finite")]
    BadResolution(f64),
    #[error("resolution {resolution} needs about {points:.3e} grid points (limit {MAX_GRID_POINTS:e})")]
    GridTooFine { resolution: f64, points: f64 },
}

/// Grid values for one coordinate: multiples of `resolution` up to `capacity`,
/// plus `capacity` itself.
pub(crate) fn axis(capacity: f64, resolution: f64) -> Vec<f64> {
    let steps = (capacity / resolution + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=steps)
        .map(|k| (k as f64 * resolution).min(capacity))
        .collect();
    let last = *values.last().expect("axis has a zero entry");
    if capacity - last > 1e-12 * capacity.max(1.0) {
        values.push(capacity);
    } else if let Some(v) = values.last_mut() {
        *v = capacity;
    }
    values
}

fn on_axis(value: f64, capacity: f64, resolution: f64) -> bool {
    let tol = 1e-9 * resolution;
    let k = (value / resolution).round();
    (value - k * resolution).abs() <= tol || (value - capacity).abs() <= tol
}

/// Calls `visit` with every feasible grid allocation of `instance`, each once.
pub(crate) fn for_each_allocation(
    instance: &CityInstance,
    resolution: f64,
    mut visit: impl FnMut(&[f64]),
) -> Result<(), GridError> {
    let n = instance.len();
    if n > MAX_GRID_LOCATIONS {
        return Err(GridError::InstanceTooLarge(n));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(GridError::BadResolution(resolution));
    }
    let largest = instance.largest_location();
    let points: f64 = (0..n)
        .map(|rest| {
            (0..n)
                .filter(|&i| i != rest)
                .map(|i| instance.capacity(i) / resolution + 2.0)
                .product::<f64>()
        })
        .sum();
    if points > MAX_GRID_POINTS {
        return Err(GridError::GridTooFine { resolution, points });
    }
    walk(instance, resolution, largest, true, &mut visit);
    for rest in (0..n).filter(|&i| i != largest) {
        walk(instance, resolution, rest, false, &mut visit);
    }
    Ok(())
}

/// Odometer over the axes of every location but `rest`. Unless `primary`,
/// only allocations whose remainder is off the `rest` axis are visited; the
/// others were already produced by the primary walk.
fn walk(
    instance: &CityInstance,
    resolution: f64,
    rest: usize,
    primary: bool,
    visit: &mut impl FnMut(&[f64]),
) {
    let n = instance.len();
    let free: Vec<usize> = (0..n).filter(|&i| i != rest).collect();
    let axes: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| axis(instance.capacity(i), resolution))
        .collect();

    let population = instance.population();
    let rest_cap = instance.capacity(rest);
    let slack = ABS_TOL * population.max(1.0);
    let mut x = vec![0.0; n];
    let mut cursor = vec![0usize; free.len()];
    loop {
        let mut used = 0.0;
        for (slot, &i) in free.iter().enumerate() {
            x[i] = axes[slot][cursor[slot]];
            used += x[i];
        }
        let remainder = population - used;
        if remainder >= -slack && remainder <= rest_cap + slack {
            x[rest] = remainder.clamp(0.0, rest_cap);
            if primary || !on_axis(x[rest], rest_cap, resolution) {
                visit(&x);
            }
        }
        // stop early along an axis once its mass alone exceeds the population
        let mut slot = 0;
        loop {
            if slot == free.len() {
                return;
            }
            cursor[slot] += 1;
            if cursor[slot] < axes[slot].len() && axes[slot][cursor[slot]] <= population + slack {
                break;
            }
            cursor[slot] = 0;
            slot += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Neighbourhood;
    use crate::pwl::PwlFunction;

    fn flat(name: &str, u: f64) -> Neighbourhood {
        Neighbourhood {
            name: name.into(),
            capacity: u,
            utility: PwlFunction::new(vec![(0.0, 1.0), (u, 1.0)]).unwrap(),
        }
    }

    #[test]
    fn axis_includes_capacity() {
        assert_eq!(axis(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(axis(0.6, 0.25), vec![0.0, 0.25, 0.5, 0.6]);
    }

    #[test]
    fn visits_exact_sums() {
        let inst = CityInstance::new(vec![flat("a", 1.0), flat("b", 0.7), flat("c", 0.5)], 1.3)
            .unwrap();
        let mut count = 0;
        for_each_allocation(&inst, 0.1, |x| {
            count += 1;
            assert!((x.iter().sum::<f64>() - 1.3).abs() < 1e-12);
            for (i, &xi) in x.iter().enumerate() {
                assert!(xi >= 0.0 && xi <= inst.capacity(i));
            }
        })
        .unwrap();
        assert!(count > 0);
    }

    #[test]
    fn reaches_full_locations_off_grid() {
        let inst = CityInstance::new(vec![flat("a", 0.8), flat("b", 1.4)], 1.92).unwrap();
        let mut seen = Vec::new();
        for_each_allocation(&inst, 0.1, |x| seen.push(x.to_vec())).unwrap();
        assert!(seen
            .iter()
            .any(|x| x[1] == 1.4 && (x[0] - 0.52).abs() < 1e-12));
        let mut keys: Vec<(i64, i64)> = seen
            .iter()
            .map(|x| ((x[0] * 1e9).round() as i64, (x[1] * 1e9).round() as i64))
            .collect();
        let total = keys.len();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), total);
    }

    #[test]
    fn rejects_large_instances() {
        let nbs = (0..4).map(|i| flat(&format!("n{i}"), 1.0)).collect();
        let inst = CityInstance::new(nbs, 2.0).unwrap();
        assert_eq!(
            for_each_allocation(&inst, 0.1, |_| {}),
            Err(GridError::InstanceTooLarge(4))
        );
    }

    #[test]
    fn rejects_bad_resolution() {
        let inst = CityInstance::new(vec![flat("a", 1.0), flat("b", 1.0)], 1.0).unwrap();
        assert!(matches!(
            for_each_allocation(&inst, 0.0, |_| {}),
            Err(GridError::BadResolution(_))
        ));
        assert!(matches!(
            for_each_allocation(&inst, 1e-12, |_| {}),
            Err(GridError::GridTooFine { .. })
        ));
    }
}
