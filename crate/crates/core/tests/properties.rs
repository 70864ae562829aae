//! Property tests for the objective, the greedy solver, traffic generation
//! and the simulator.

use liftsched_core::waiting::CardinalityPenalty;
use liftsched_core::{
    brute_force_optimal, generate, greedy_maximize, run, AssignmentSet, BuildingConfig, DestinationDistribution, GroundElement, Objective, Pattern, SchedulerKind, SimOptions, TrafficSpec, WeightSet,
};
use proptest::prelude::*;
use statrs::distribution::{DiscreteCDF, Poisson};

fn weight_set(max_calls: usize, max_cars: usize) -> impl Strategy<Value = WeightSet> {
    (1..=max_calls, 1..=max_cars).prop_flat_map(|(n, c)| {
        (prop::collection::vec(prop::collection::vec(0.0..100.0f64, c), n), prop::collection::vec(0.0..50.0f64, c * n * n)).prop_map(move |(unary, flat)| {
            let mut pairwise = vec![vec![vec![0.0; n]; n]; c];
            for (k, p) in pairwise.iter_mut().enumerate() {
                for i in 0..n {
                    for j in i + 1..n {
                        let w = flat[(k * n + i) * n + j];
                        p[i][j] = w;
                        p[j][i] = w;
                    }
                }
            }
            WeightSet::from_parts(unary, pairwise, Vec::new()).unwrap()
        })
    })
}

/// A weight set with a random subset `a` of its ground set.
fn with_subset(max_calls: usize, max_cars: usize) -> impl Strategy<Value = (WeightSet, AssignmentSet)> {
    weight_set(max_calls, max_cars).prop_flat_map(|ws| {
        let (n, c) = (ws.calls(), ws.cars());
        prop::collection::vec(any::<bool>(), n * c).prop_map(move |bits| {
            let mut a = AssignmentSet::empty(n, c);
            for i in 0..n {
                for k in 0..c {
                    if bits[i * c + k] {
                        a.insert(GroundElement::new(i, k));
                    }
                }
            }
            (ws.clone(), a)
        })
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn objective_is_zero_at_empty(ws in weight_set(6, 4)) {
        let obj = Objective::new(ws);
        let m = obj.matroid();
        prop_assert!(close(obj.f(&AssignmentSet::empty(m.calls, m.cars)), 0.0));
    }

    #[test]
    fn marginals_match_full_evaluation((ws, a) in with_subset(6, 4)) {
        let obj = Objective::new(ws);
        for e in obj.matroid().ground_set() {
            if a.contains(e) {
                continue;
            }
            let b = a.with(e);
            prop_assert!(close(obj.marginal(&a, e), obj.f(&b) - obj.f(&a)));
            prop_assert!(close(obj.h1(&b) - obj.h1(&a), obj.weights().penalty(e.call)));
            let pair: f64 = a.iter().filter(|o| o.car == e.car).map(|o| obj.weights().pairwise(e.call, o.call, e.car)).sum();
            prop_assert!(close(obj.h(&b) - obj.h(&a), -obj.weights().unary(e.call, e.car) - pair));
        }
    }

    #[test]
    fn diminishing_returns((ws, a) in with_subset(5, 3), extra in any::<u64>()) {
        let obj = Objective::new(ws);
        let ground: Vec<_> = obj.matroid().ground_set().collect();
        let mut b = a.clone();
        b.insert(ground[(extra as usize) % ground.len()]);
        for e in ground {
            if !b.contains(e) {
                prop_assert!(obj.marginal(&a, e) >= obj.marginal(&b, e) - 1e-9);
                prop_assert!(obj.marginal(&a, e) >= -1e-9);
            }
        }
    }

    #[test]
    fn penalties_are_row_maxima(ws in weight_set(6, 4)) {
        for i in 0..ws.calls() {
            let best = (0..ws.cars())
                .map(|k| ws.unary(i, k) + (0..ws.calls()).filter(|&j| j != i).map(|j| ws.pairwise(i, j, k)).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(close(ws.penalty(i), best));
        }
        prop_assert!(close(ws.offset(), ws.cars() as f64 * ws.penalties().iter().sum::<f64>()));
    }

    #[test]
    fn greedy_returns_a_basis_within_half_of_optimal(ws in weight_set(5, 3)) {
        let obj = Objective::new(ws);
        let m = obj.matroid();
        let greedy = greedy_maximize(&obj, &m);
        prop_assert!(m.is_basis(&greedy));
        let shift: f64 = obj.weights().penalties().iter().sum();
        prop_assert!(close(obj.f(&greedy), obj.h(&greedy) + shift));
        let opt = brute_force_optimal(&obj, &m, 1_000_000).unwrap();
        prop_assert!(obj.h(&greedy) + shift >= 0.5 * (obj.h(&opt) + shift) - 1e-9);
        prop_assert!(obj.g(&opt) <= obj.g(&greedy) + 1e-9);
    }

    #[test]
    fn cardinality_penalty_marginals(k in 2usize..6, pen in 0.0..20.0f64, m in 0usize..10) {
        let t = CardinalityPenalty { k, penalty: pen };
        prop_assert!(close(t.total(m + 1) - t.total(m), t.marginal(m)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn traffic_is_ordered_and_in_range(seed in any::<u64>(), floors in 3usize..15, rate in 1.0..40.0f64, kind in 0usize..3) {
        let pattern = [Pattern::Interfloor, Pattern::UpPeak, Pattern::DownPeak][kind];
        let b = BuildingConfig::new(floors, 2);
        let spec = TrafficSpec { pattern, rate, duration: 900.0, seed };
        let list = generate(&spec, &b).unwrap();
        prop_assert_eq!(&list, &generate(&spec, &b).unwrap());
        for (k, a) in list.iter().enumerate() {
            prop_assert_eq!(a.id, k as u64);
            prop_assert!(a.arrival_time >= 0.0 && a.arrival_time < 900.0);
            prop_assert!(a.origin < floors && a.destination < floors && a.origin != a.destination);
        }
        prop_assert!(list.windows(2).all(|w| w[0].arrival_time < w[1].arrival_time));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulation_conserves_passengers(seed in any::<u64>(), floors in 4usize..10, cars in 1usize..4, which in 0usize..4) {
        let name = ["submodular", "unary_only", "eta", "collective"][which];
        let b = BuildingConfig::new(floors, cars);
        let traffic = generate(&TrafficSpec { pattern: Pattern::Interfloor, rate: 15.0, duration: 600.0, seed }, &b).unwrap();
        let opts = SimOptions { horizon: 600.0, ..SimOptions::default() };
        let mut s = SchedulerKind::preset(name).unwrap().build(name, DestinationDistribution::Uniform);
        let out = run(&b, &traffic, &mut s, &opts).unwrap();
        prop_assert_eq!(out.passengers.len(), traffic.len());
        prop_assert_eq!(out.stats.served + out.stats.unserved_at_end, traffic.len());
        for p in &out.passengers {
            if let Some(board) = p.board_time {
                prop_assert!(board >= p.arrival_time);
                prop_assert!(p.car.is_some_and(|c| c < cars));
                if let Some(alight) = p.alight_time {
                    prop_assert!(alight > board);
                }
            }
        }
        let mut again = SchedulerKind::preset(name).unwrap().build(name, DestinationDistribution::Uniform);
        let rerun = run(&b, &traffic, &mut again, &opts).unwrap();
        prop_assert_eq!(rerun.passengers, out.passengers);
    }
}

#[test]
fn arrival_counts_follow_the_poisson_law() {
    let b = BuildingConfig::new(10, 2);
    let spec = |seed| TrafficSpec { pattern: Pattern::Interfloor, rate: 12.0, duration: 3600.0, seed };
    let mean = spec(0).intensity(b.population) * 3600.0;
    let law = Poisson::new(mean).unwrap();
    let mut total = 0usize;
    let runs = 40;
    for seed in 0..runs {
        let n = generate(&spec(seed), &b).unwrap().len();
        let p = law.cdf(n as u64);
        assert!((1e-5..1.0 - 1e-5).contains(&p), "seed {seed}: {n} arrivals, expected about {mean}");
        total += n;
    }
    let pooled = Poisson::new(mean * runs as f64).unwrap().cdf(total as u64);
    assert!((1e-4..1.0 - 1e-4).contains(&pooled), "pooled count {total}");
}

#[test]
fn hourly_count_matches_the_intensity() {
    let mut b = BuildingConfig::new(6, 2);
    b.population = 100;
    let spec = |seed| TrafficSpec { pattern: Pattern::Interfloor, rate: 10.0, duration: 3600.0, seed };
    let mean = 120.0;
    assert!((spec(0).intensity(b.population) * 3600.0 - mean).abs() < 1e-9);
    let runs = 100;
    let total: usize = (0..runs).map(|seed| generate(&spec(seed), &b).unwrap().len()).sum();
    let sample = total as f64 / runs as f64;
    let sigma = (mean / runs as f64).sqrt();
    assert!((sample - mean).abs() <= 3.0 * sigma, "sample mean {sample}");
}
