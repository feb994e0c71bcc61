use bnm::equilibrium::{proportional_start, uniform_start};
use bnm::opt::default_grid;
use bnm::scenarios::random_concave;
use bnm::{
    best_response_dynamics, find_critical, opt_dp, opt_refine, plan_investment, potential,
    random_instance, select_k_star, symmetric_difference_area, welfare,
    welfare_upper_bound_greedy, Allocation, Branch, CityInstance, DynamicsConfig, Neighbourhood,
    PwlFunction, COST_FACTOR, PHI,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn concave(seed: u64, capacity: f64) -> PwlFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_concave(&mut rng, capacity, (0.1, 5.0))
}

fn instance(seed: u64, n: usize) -> CityInstance {
    random_instance(seed, n, (0.5, 2.0), (0.5, 3.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rudimentary_cost_bound(seed in any::<u64>(), u in 0.1f64..50.0, eps in 0.01f64..1.0) {
        let f = concave(seed, u);
        let h = f.peak_profile().h;
        let r = f.raise_to_target(eps * h).unwrap();
        prop_assert!(r.cost <= eps * eps / 2.0 * u * h + 1e-9);
        prop_assert!(r.alpha <= r.beta);
        let area = symmetric_difference_area(&f, &r.g).unwrap();
        prop_assert!((area - r.cost).abs() <= 1e-9 * (1.0 + r.cost));
    }

    #[test]
    fn raised_function_dominates(seed in any::<u64>(), u in 0.1f64..50.0, eps in 0.01f64..1.0) {
        let f = concave(seed, u);
        let tau = eps * f.peak_profile().h;
        let g = f.raise_to_target(tau).unwrap().g;
        for k in 0..=200 {
            let x = u * k as f64 / 200.0;
            let (fx, gx) = (f.value_at(x), g.value_at(x));
            prop_assert!(gx >= fx - 1e-9);
            prop_assert!((gx - fx.max(tau)).abs() <= 1e-9 * (1.0 + tau));
        }
    }

    #[test]
    fn rudimentary_cost_monotone_in_target(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = concave(seed, 3.0);
        let h = f.peak_profile().h;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let c_lo = f.raise_to_target(lo * h).unwrap().cost;
        let c_hi = f.raise_to_target(hi * h).unwrap().cost;
        prop_assert!(c_lo <= c_hi + 1e-12);
    }

    #[test]
    fn area_is_a_metric(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (f, g, k) = (concave(s1, 2.0), concave(s2, 2.0), concave(s3, 2.0));
        let fg = symmetric_difference_area(&f, &g).unwrap();
        let gf = symmetric_difference_area(&g, &f).unwrap();
        let gk = symmetric_difference_area(&g, &k).unwrap();
        let fk = symmetric_difference_area(&f, &k).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg));
        prop_assert!(fk <= fg + gk + 1e-9);
        prop_assert_eq!(symmetric_difference_area(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn integral_is_additive(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let f = concave(seed, 4.0);
        let mut p = [4.0 * a, 4.0 * b, 4.0 * c];
        p.sort_by(f64::total_cmp);
        let whole = f.integral(p[0], p[2]).unwrap();
        let parts = f.integral(p[0], p[1]).unwrap() + f.integral(p[1], p[2]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9);
        prop_assert!((f.primitive(p[2]) - f.primitive(p[0]) - whole).abs() <= 1e-9);
    }

    #[test]
    fn welfare_is_permutation_invariant(seed in any::<u64>(), n in 2usize..6, shift in 0usize..6) {
        let inst = instance(seed, n);
        let x = proportional_start(&inst);
        let w = welfare(&inst, &x).unwrap();
        let k = shift % n;
        let mut nbs: Vec<Neighbourhood> = inst.neighbourhoods().to_vec();
        nbs.rotate_left(k);
        let rotated = CityInstance::new(nbs, inst.population()).unwrap();
        let mut y = x.as_slice().to_vec();
        y.rotate_left(k);
        let y = Allocation::new(&rotated, y).unwrap();
        let wr = welfare(&rotated, &y).unwrap();
        prop_assert!((w - wr).abs() <= 1e-9 * (1.0 + w.abs()));
    }

    #[test]
    fn plan_cost_matches_recomputation(seed in any::<u64>(), n in 1usize..6, eps in 0.05f64..1.0) {
        let inst = instance(seed, n);
        let w = welfare_upper_bound_greedy(&inst);
        let (plan, diag) = plan_investment(&inst, eps, w).unwrap();
        let recomputed = plan.recomputed_cost(&inst).unwrap();
        prop_assert!((plan.total_cost() - recomputed).abs() <= 1e-9 * (1.0 + recomputed));
        prop_assert!(plan.total_cost() <= COST_FACTOR * eps * eps * w + 1e-9);
        prop_assert_eq!(diag.total_cost, plan.total_cost());
    }

    #[test]
    fn planner_branches_are_total(seed in any::<u64>(), n in 1usize..7, scale in 0.2f64..1.0) {
        let inst = instance(seed, n);
        let w = scale * welfare_upper_bound_greedy(&inst);
        let (_, diag) = plan_investment(&inst, 0.5, w).unwrap();
        match diag.branch {
            Branch::Critical => {
                let (_, lambda) = find_critical(&inst, w).unwrap();
                prop_assert!(lambda >= PHI - 1e-12);
                prop_assert_eq!(diag.lambda, lambda);
            }
            Branch::NoCritical => {
                prop_assert!(find_critical(&inst, w).is_none());
                let (k, lambda, _) = select_k_star(&inst, w).unwrap();
                prop_assert_eq!(diag.k_star, Some(k));
                prop_assert!((1.0 - 1e-12..1.0 + PHI).contains(&lambda));
            }
        }
    }

    #[test]
    fn plan_cost_grows_with_epsilon(seed in any::<u64>(), n in 1usize..6, a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let inst = instance(seed, n);
        let w = welfare_upper_bound_greedy(&inst);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let c_lo = plan_investment(&inst, lo, w).unwrap().0.total_cost();
        let c_hi = plan_investment(&inst, hi, w).unwrap().0.total_cost();
        prop_assert!(c_lo <= c_hi + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dynamics_stay_feasible_and_are_deterministic(seed in any::<u64>(), n in 2usize..6) {
        let inst = instance(seed, n);
        let cfg = DynamicsConfig::for_instance(&inst);
        let start = uniform_start(&inst);
        let a = best_response_dynamics(&inst, &start, &cfg);
        let b = best_response_dynamics(&inst, &start, &cfg);
        prop_assert_eq!(&a, &b);
        let x = a.allocation.as_slice();
        let total: f64 = x.iter().sum();
        prop_assert!((total - inst.population()).abs() <= 1e-9 * inst.population().max(1.0));
        for (i, &xi) in x.iter().enumerate() {
            prop_assert!(xi >= 0.0 && xi <= inst.capacity(i));
        }
    }

    #[test]
    fn potential_rises_on_small_moves(seed in any::<u64>(), n in 2usize..5) {
        let inst = instance(seed, n);
        let cfg = DynamicsConfig::for_instance(&inst).with_trace();
        let rep = best_response_dynamics(&inst, &proportional_start(&inst), &cfg);
        let lip = inst.max_abs_slope();
        let trace = rep.trace.unwrap();
        for w in trace.windows(2) {
            if w[0].moved <= w[0].max_regret / (2.0 * lip) {
                prop_assert!(w[1].potential >= w[0].potential - 1e-12 * w[0].potential.abs().max(1.0));
            }
        }
        prop_assert_eq!(trace.last().unwrap().potential, potential(&inst, &rep.allocation));
    }

    #[test]
    fn solver_sandwich(seed in any::<u64>(), n in 1usize..5) {
        let inst = instance(seed, n);
        let dp = opt_dp(&inst, default_grid(&inst)).unwrap();
        let refined = opt_refine(&inst, &dp);
        let greedy = welfare_upper_bound_greedy(&inst);
        prop_assert!(dp.value <= refined.value + 1e-9);
        prop_assert!(refined.value <= greedy + 1e-9);
    }
}
