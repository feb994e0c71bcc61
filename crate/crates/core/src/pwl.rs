//! Exact geometry for piecewise-linear utility functions.
//!
//! A [`PwlFunction`] lives on `[0, u]` where `u` is the capacity of the
//! neighbourhood that owns it. Game utilities are concave; functions produced
//! by [`PwlFunction::raise_to_target`] generally are not, and are built through
//! the relaxed constructor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for domain and value comparisons.
pub const ABS_TOL: f64 = 1e-9;

/// Tolerance on successive slope comparisons in the concavity check.
pub const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PwlError {
    #[error("a piecewise-linear function needs at least 2 breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoint {index} is not a finite number")]
    NonFinite { index: usize },
    #[error("domain must start at 0, first breakpoint is at {x}")]
    DomainNotAtZero { x: f64 },
    #[error("breakpoint masses must be strictly increasing (breakpoint {index})")]
    UnsortedDomain { index: usize },
    #[error("utility {value} at breakpoint {index} is negative")]
    NegativeValue { index: usize, value: f64 },
    #[error("slope increases at breakpoint {index} ({left} -> {right}); function is not concave")]
    NonConcave { index: usize, left: f64, right: f64 },
    #[error("mass {x} lies outside the domain [0, {upper}]")]
    OutOfDomain { x: f64, upper: f64 },
    #[error("target payoff {tau} exceeds the maximum utility {h}")]
    TargetAboveMax { tau: f64, h: f64 },
    #[error("domains differ: [0, {left}] vs [0, {right}]")]
    DomainMismatch { left: f64, right: f64 },
}

/// The on-disk form: `{"breakpoints": [[mass, utility], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    pub breakpoints: Vec<[f64; 2]>,
}

/// A non-negative piecewise-linear function on `[0, u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Breakpoints", try_from = "Breakpoints")]
pub struct PwlFunction {
    points: Vec<(f64, f64)>,
    concave: bool,
}

/// Peak geometry of a utility: `(0, ell)`, `(sigma, h)` and `(u, ell_prime)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakProfile {
    pub h: f64,
    pub sigma: f64,
    pub ell: f64,
    pub ell_prime: f64,
}

/// Output of the rudimentary transform: `g` equals the target `tau` on the
/// low flanks `[0, alpha)` and `(beta, u]` and follows `f` in between.
#[derive(Debug, Clone, PartialEq)]
pub struct RudimentaryResult {
    pub g: PwlFunction,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub cost: f64,
}

impl From<PwlFunction> for Breakpoints {
    fn from(f: PwlFunction) -> Self {
        Breakpoints {
            breakpoints: f.points.iter().map(|&(x, y)| [x, y]).collect(),
        }
    }
}

impl TryFrom<Breakpoints> for PwlFunction {
    type Error = PwlError;

    fn try_from(raw: Breakpoints) -> Result<Self, Self::Error> {
        PwlFunction::relaxed(raw.breakpoints.iter().map(|p| (p[0], p[1])).collect())
    }
}

fn slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

fn check_shape(points: &[(f64, f64)]) -> Result<(), PwlError> {
    if points.len() < 2 {
        return Err(PwlError::TooFewBreakpoints(points.len()));
    }
    for (index, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(PwlError::NonFinite { index });
        }
    }
    if points[0].0 != 0.0 {
        return Err(PwlError::DomainNotAtZero { x: points[0].0 });
    }
    for index in 1..points.len() {
        if points[index].0 <= points[index - 1].0 {
            return Err(PwlError::UnsortedDomain { index });
        }
    }
    for (index, &(_, value)) in points.iter().enumerate() {
        if value < 0.0 {
            return Err(PwlError::NegativeValue { index, value });
        }
    }
    Ok(())
}

fn first_concavity_violation(points: &[(f64, f64)]) -> Option<PwlError> {
    points.windows(3).enumerate().find_map(|(k, w)| {
        let left = slope(w[0], w[1]);
        let right = slope(w[1], w[2]);
        (right > left + SLOPE_TOL * left.abs().max(1.0)).then_some(PwlError::NonConcave {
            index: k + 1,
            left,
            right,
        })
    })
}

impl PwlFunction {
    /// Validates a concave utility.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        check_shape(&points)?;
        if let Some(err) = first_concavity_violation(&points) {
            return Err(err);
        }
        Ok(PwlFunction {
            points,
            concave: true,
        })
    }

    /// Validates everything except concavity.
    pub fn relaxed(points: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        check_shape(&points)?;
        let concave = first_concavity_violation(&points).is_none();
        Ok(PwlFunction { points, concave })
    }

    /// Re-runs the concavity check and returns the first violation, if any.
    pub fn require_concave(&self) -> Result<(), PwlError> {
        match first_concavity_violation(&self.points) {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Right end of the domain.
    pub fn capacity(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    fn segment_index(&self, x: f64) -> usize {
        let idx = self.points.partition_point(|p| p.0 <= x);
        idx.saturating_sub(1).min(self.points.len() - 2)
    }

    /// Evaluates `f(x)`, rejecting masses outside `[0, u]` (up to [`ABS_TOL`]).
    pub fn eval(&self, x: f64) -> Result<f64, PwlError> {
        let upper = self.capacity();
        if !(x >= -ABS_TOL && x <= upper + ABS_TOL) {
            return Err(PwlError::OutOfDomain { x, upper });
        }
        Ok(self.value_at(x))
    }

    /// Evaluates `f` with `x` clamped into the domain.
    pub fn value_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.capacity());
        let k = self.segment_index(x);
        let (a, b) = (self.points[k], self.points[k + 1]);
        if x == a.0 {
            a.1
        } else if x == b.0 {
            b.1
        } else {
            a.1 + (x - a.0) * slope(a, b)
        }
    }

    /// Slope and intercept `(intercept, slope)` of the linear piece that covers
    /// the open interval just right of `x` (the last piece at `x = u`).
    pub fn piece_at(&self, x: f64) -> (f64, f64) {
        let k = self.segment_index(x.clamp(0.0, self.capacity()));
        let (a, b) = (self.points[k], self.points[k + 1]);
        let s = slope(a, b);
        (a.1 - s * a.0, s)
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| slope(w[0], w[1]))
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.slopes().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Largest `|d(x f(x))/dx|` over the pieces, i.e. the Lipschitz constant of
    /// the welfare contribution `x f(x)`.
    pub fn welfare_slope_bound(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let s = slope(w[0], w[1]);
                let at = |(x, y): (f64, f64)| (y + x * s).abs();
                at(w[0]).max(at(w[1]))
            })
            .fold(0.0, f64::max)
    }

    pub fn peak_profile(&self) -> PeakProfile {
        let (sigma, h) = self
            .points
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best });
        PeakProfile {
            h,
            sigma,
            ell: self.points[0].1,
            ell_prime: self.points[self.points.len() - 1].1,
        }
    }

    /// Exact `∫_a^b f`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64, PwlError> {
        let upper = self.capacity();
        for x in [a, b] {
            if !(x >= -ABS_TOL && x <= upper + ABS_TOL) {
                return Err(PwlError::OutOfDomain { x, upper });
            }
        }
        if b < a {
            return Err(PwlError::OutOfDomain { x: a, upper: b });
        }
        Ok(self.integral_clamped(a, b))
    }

    fn integral_clamped(&self, a: f64, b: f64) -> f64 {
        let a = a.clamp(0.0, self.capacity());
        let b = b.clamp(a, self.capacity());
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        for w in self.points.windows(2) {
            let lo = w[0].0.max(a);
            let hi = w[1].0.min(b);
            if hi > lo {
                let s = slope(w[0], w[1]);
                let ylo = w[0].1 + (lo - w[0].0) * s;
                let yhi = w[0].1 + (hi - w[0].0) * s;
                total += 0.5 * (ylo + yhi) * (hi - lo);
            }
        }
        total
    }

    /// `∫_0^x f`, clamped to the domain.
    pub fn primitive(&self, x: f64) -> f64 {
        self.integral_clamped(0.0, x)
    }

    /// Applies the rudimentary transform with target payoff `tau`.
    ///
    /// The left crossing `alpha` is the smallest root of `f = tau` on the
    /// rising side and `beta` the largest root on the falling side; a flank
    /// whose end value already reaches `tau` is left untouched.
    pub fn raise_to_target(&self, tau: f64) -> Result<RudimentaryResult, PwlError> {
        let peak = self.peak_profile();
        if tau > peak.h + ABS_TOL * peak.h.max(1.0) {
            return Err(PwlError::TargetAboveMax { tau, h: peak.h });
        }
        let tau = tau.min(peak.h);
        let u = self.capacity();
        let pts = &self.points;
        let last = pts.len() - 1;

        let alpha = if peak.ell < tau {
            // first breakpoint reaching tau; the segment before it crosses
            let k = pts.iter().position(|p| p.1 >= tau).expect("peak reaches tau");
            let (a, b) = (pts[k - 1], pts[k]);
            if b.1 == tau {
                b.0
            } else {
                a.0 + (tau - a.1) * (b.0 - a.0) / (b.1 - a.1)
            }
        } else {
            0.0
        };
        let beta = if peak.ell_prime < tau {
            let k = pts.iter().rposition(|p| p.1 >= tau).expect("peak reaches tau");
            let (a, b) = (pts[k], pts[k + 1]);
            if a.1 == tau {
                a.0
            } else {
                b.0 - (tau - b.1) * (b.0 - a.0) / (a.1 - b.1)
            }
        } else {
            u
        };

        let eps = 1e-12 * u.max(1.0);
        let mut g: Vec<(f64, f64)> = Vec::with_capacity(pts.len() + 4);
        let mut push = |p: (f64, f64)| match g.last() {
            Some(prev) if p.0 <= prev.0 + eps => {}
            _ => g.push(p),
        };
        if alpha > 0.0 {
            push((0.0, tau));
            push((alpha, tau));
        } else {
            push(pts[0]);
        }
        for &p in &pts[1..last] {
            if p.0 > alpha + eps && p.0 < beta - eps {
                push(p);
            }
        }
        if beta < u {
            push((beta, tau));
            push((u, tau));
        } else {
            push(pts[last]);
        }
        // a dropped endpoint leaves the domain short of u; pin it back
        if let Some(end) = g.last_mut() {
            end.0 = u;
        }

        let left = if alpha > 0.0 {
            tau * alpha - self.integral_clamped(0.0, alpha)
        } else {
            0.0
        };
        let right = if beta < u {
            tau * (u - beta) - self.integral_clamped(beta, u)
        } else {
            0.0
        };

        Ok(RudimentaryResult {
            g: PwlFunction::relaxed(g)?,
            tau,
            alpha,
            beta,
            cost: left.max(0.0) + right.max(0.0),
        })
    }
}

/// `∫|f - g|` over the shared domain, exact: the domain is cut at every
/// breakpoint of either function and at every sign change of `f - g`.
pub fn symmetric_difference_area(f: &PwlFunction, g: &PwlFunction) -> Result<f64, PwlError> {
    let (uf, ug) = (f.capacity(), g.capacity());
    if (uf - ug).abs() > ABS_TOL * uf.max(1.0) {
        return Err(PwlError::DomainMismatch {
            left: uf,
            right: ug,
        });
    }
    let mut xs: Vec<f64> = f
        .breakpoints()
        .iter()
        .chain(g.breakpoints())
        .map(|p| p.0.min(uf))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut area = 0.0;
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let da = f.value_at(a) - g.value_at(a);
        let db = f.value_at(b) - g.value_at(b);
        let width = b - a;
        area += if da * db >= 0.0 {
            0.5 * (da + db).abs() * width
        } else {
            0.5 * (da * da + db * db) / (da.abs() + db.abs()) * width
        };
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tent(left: f64, peak: (f64, f64), right: f64) -> PwlFunction {
        PwlFunction::new(vec![(0.0, left), peak, (1.0, right)]).unwrap()
    }

    /// Midpoint rule on a uniform grid, evaluated through a closure so the
    /// integrand never touches the exact area code.
    fn quadrature(steps: usize, upper: f64, h: impl Fn(f64) -> f64) -> f64 {
        let dx = upper / steps as f64;
        (0..steps).map(|k| h((k as f64 + 0.5) * dx)).sum::<f64>() * dx
    }

    fn lerp(points: &[(f64, f64)], x: f64) -> f64 {
        for w in points.windows(2) {
            if x >= w[0].0 && x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 * (1.0 - t) + w[1].1 * t;
            }
        }
        panic!("{x} outside domain")
    }

    #[test]
    fn validates_tent() {
        let f = tent(0.01, (0.5, 1.0), 0.0);
        assert!(f.is_concave());
        assert_eq!(f.capacity(), 1.0);
    }

    #[test]
    fn constant_zero_is_concave() {
        let f = PwlFunction::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(f.is_concave());
    }

    #[test]
    fn rejects_convex_kink() {
        let err = PwlFunction::new(vec![(0.0, 0.0), (0.5, 0.1), (1.0, 1.0)]).unwrap_err();
        assert!(matches!(err, PwlError::NonConcave { index: 1, .. }));
    }

    #[test]
    fn rejects_malformed_breakpoints() {
        assert!(matches!(
            PwlFunction::new(vec![(0.0, 1.0)]),
            Err(PwlError::TooFewBreakpoints(1))
        ));
        assert!(matches!(
            PwlFunction::new(vec![(0.1, 1.0), (1.0, 1.0)]),
            Err(PwlError::DomainNotAtZero { .. })
        ));
        assert!(matches!(
            PwlFunction::new(vec![(0.0, 1.0), (0.5, 1.0), (0.5, 1.0)]),
            Err(PwlError::UnsortedDomain { index: 2 })
        ));
        assert!(matches!(
            PwlFunction::new(vec![(0.0, 1.0), (1.0, -0.5)]),
            Err(PwlError::NegativeValue { index: 1, .. })
        ));
        assert!(matches!(
            PwlFunction::new(vec![(0.0, f64::NAN), (1.0, 0.0)]),
            Err(PwlError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn relaxed_admits_non_concave() {
        let g = PwlFunction::relaxed(vec![(0.0, 0.0), (0.5, 0.1), (1.0, 1.0)]).unwrap();
        assert!(!g.is_concave());
        assert!(g.require_concave().is_err());
    }

    #[test]
    fn eval_tent() {
        let f = tent(0.01, (0.5, 1.0), 0.0);
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(0.0).unwrap(), 0.01);
        assert_eq!(f.eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f.eval(0.25).unwrap(), 0.505, epsilon = 1e-15);
        assert!(matches!(f.eval(1.1), Err(PwlError::OutOfDomain { .. })));
        assert!(matches!(f.eval(-0.1), Err(PwlError::OutOfDomain { .. })));
    }

    #[test]
    fn eval_exact_at_breakpoints() {
        let f = PwlFunction::new(vec![(0.0, 26.0), (50.0, 101.0), (81.0, 58.0), (100.0, 1.0)])
            .unwrap();
        for &(x, y) in f.breakpoints() {
            assert_eq!(f.eval(x).unwrap(), y);
        }
    }

    #[test]
    fn peak_profiles() {
        let p = tent(0.01, (0.5, 1.0), 0.0).peak_profile();
        assert_eq!(
            p,
            PeakProfile {
                h: 1.0,
                sigma: 0.5,
                ell: 0.01,
                ell_prime: 0.0
            }
        );
        let flat = PwlFunction::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap().peak_profile();
        assert_eq!((flat.h, flat.sigma, flat.ell, flat.ell_prime), (0.0, 0.0, 0.0, 0.0));
        let blue = PwlFunction::new(vec![(0.0, 26.0), (50.0, 101.0), (81.0, 58.0), (100.0, 1.0)])
            .unwrap()
            .peak_profile();
        assert_eq!((blue.h, blue.sigma, blue.ell, blue.ell_prime), (101.0, 50.0, 26.0, 1.0));
    }

    #[test]
    fn plateau_peak_takes_leftmost_argmax() {
        let f = PwlFunction::new(vec![(0.0, 0.0), (0.2, 1.0), (0.7, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(f.peak_profile().sigma, 0.2);
    }

    #[test]
    fn raise_symmetric_tent() {
        let f = tent(0.0, (0.5, 1.0), 0.0);
        let r = f.raise_to_target(0.1).unwrap();
        assert_abs_diff_eq!(r.alpha, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(r.beta, 0.95, epsilon = 1e-15);

        // oracle: |g - f| with g built from the case definition, 1e-6 grid
        let g_case = |x: f64| {
            if x < r.alpha || x > r.beta {
                0.1
            } else {
                lerp(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)], x)
            }
        };
        let oracle = quadrature(1_000_000, 1.0, |x| {
            (g_case(x) - lerp(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)], x)).abs()
        });
        assert_abs_diff_eq!(oracle, 0.005, epsilon = 1e-9);
        assert_abs_diff_eq!(r.cost, 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(
            symmetric_difference_area(&f, &r.g).unwrap(),
            0.005,
            epsilon = 1e-15
        );
    }

    #[test]
    fn raise_decreasing_line_tail() {
        // f = 1 - x, tau = eps/4 with eps = 0.2
        let f = PwlFunction::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        let r = f.raise_to_target(0.05).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_abs_diff_eq!(r.beta, 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(r.cost, 0.2 * 0.2 / 32.0, epsilon = 1e-15);
        let g = r.g.breakpoints();
        assert_eq!(g[0], (0.0, 1.0));
        assert_eq!(*g.last().unwrap(), (1.0, 0.05));
        assert_abs_diff_eq!(r.g.value_at(0.97), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn zero_target_is_identity() {
        let f = tent(0.01, (0.5, 1.0), 0.0);
        let r = f.raise_to_target(0.0).unwrap();
        assert_eq!((r.alpha, r.beta, r.cost), (0.0, 1.0, 0.0));
        assert_eq!(r.g.breakpoints(), f.breakpoints());
    }

    #[test]
    fn target_above_peak_rejected() {
        let f = tent(0.01, (0.5, 1.0), 0.0);
        assert!(matches!(
            f.raise_to_target(1.5),
            Err(PwlError::TargetAboveMax { .. })
        ));
    }

    #[test]
    fn target_on_flat_segment_keeps_it() {
        let f = PwlFunction::new(vec![(0.0, 0.0), (0.2, 0.5), (0.6, 0.5), (1.0, 0.0)]).unwrap();
        let r = f.raise_to_target(0.5).unwrap();
        assert_eq!(r.alpha, 0.2);
        assert_eq!(r.beta, 0.6);
        assert_abs_diff_eq!(r.cost, 0.5 * 0.2 * 0.5 + 0.5 * 0.4 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn target_at_sharp_peak() {
        let f = tent(0.0, (0.5, 1.0), 0.0);
        let r = f.raise_to_target(1.0).unwrap();
        assert_eq!((r.alpha, r.beta), (0.5, 0.5));
        assert_abs_diff_eq!(r.cost, 0.5, epsilon = 1e-15);
        assert_eq!(r.g.breakpoints(), &[(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn symmetric_difference_raised_tent_geometry() {
        let delta = 0.01;
        let solid = tent(delta, (0.5, 1.0), 0.0);
        let dashed = tent(3.0 * delta, (0.5, 1.0 + 2.0 * delta), 2.0 * delta);
        assert_abs_diff_eq!(
            symmetric_difference_area(&solid, &dashed).unwrap(),
            2.0 * delta,
            epsilon = 1e-15
        );
        assert_eq!(symmetric_difference_area(&solid, &solid).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_difference_with_crossing() {
        let f = PwlFunction::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let g = PwlFunction::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(symmetric_difference_area(&f, &g).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_difference_domain_mismatch() {
        let f = PwlFunction::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let g = PwlFunction::new(vec![(0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert!(matches!(
            symmetric_difference_area(&f, &g),
            Err(PwlError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn integrals() {
        let f = tent(0.0, (0.5, 1.0), 0.0);
        assert_abs_diff_eq!(f.integral(0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(f.integral(0.3, 0.3).unwrap(), 0.0);
        assert!(f.integral(0.0, 2.0).is_err());
        assert!(f.integral(0.6, 0.3).is_err());

        let fig = tent(0.01, (0.5, 1.0), 0.0);
        let pts = [(0.0, 0.01), (0.5, 1.0), (1.0, 0.0)];
        let oracle = quadrature(1_000_000, 0.5, |x| lerp(&pts, x));
        assert_abs_diff_eq!(oracle, 0.2525, epsilon = 1e-9);
        assert_abs_diff_eq!(fig.integral(0.0, 0.5).unwrap(), 0.2525, epsilon = 1e-15);
    }

    #[test]
    fn welfare_slope_bound_of_tent() {
        // d(x f)/dx = f + x f'; on the falling side at x = 1 this is 0 - 2
        let f = tent(0.0, (0.5, 1.0), 0.0);
        assert_abs_diff_eq!(f.welfare_slope_bound(), 2.0, epsilon = 1e-15);
        assert_eq!(f.max_abs_slope(), 2.0);
    }

    #[test]
    fn serde_shape() {
        let f = tent(0.01, (0.5, 1.0), 0.0);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"breakpoints":[[0.0,0.01],[0.5,1.0],[1.0,0.0]]}"#);
        let back: PwlFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<PwlFunction>(r#"{"breakpoints":[[0.0,1.0]]}"#).is_err());
    }
}
