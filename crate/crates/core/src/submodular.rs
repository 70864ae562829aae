//! Assignment as monotone submodular maximization over a partition matroid.
//!
//! The ground set holds one element `(i, c)` per (hall call, car) pair. The
//! objective is
//!
//! ```text
//! f(A) = h(A) + h1(A) + C·Σ p_i,   h = −g,   h1 = −Σ p_i (C − |A ∩ E_i|)
//! ```
//!
//! so that `f(∅) = 0`, `f` is monotone, and every complete assignment
//! outscores any partial one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::waiting::WeightSet;

/// Element `a_i^c`: call `i` served by car `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroundElement {
    pub call: usize,
    pub car: usize,
}

impl GroundElement {
    pub fn new(call: usize, car: usize) -> Self {
        GroundElement { call, car }
    }
}

/// A subset of the ground set, stored as its indicator vector `x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentSet {
    calls: usize,
    cars: usize,
    x: Vec<bool>,
}

impl AssignmentSet {
    pub fn empty(calls: usize, cars: usize) -> Self {
        AssignmentSet { calls, cars, x: vec![false; calls * cars] }
    }

    /// Complete or partial assignment from a per-call car choice.
    pub fn from_choices(cars: usize, choices: &[Option<usize>]) -> Self {
        let mut set = AssignmentSet::empty(choices.len(), cars);
        for (i, c) in choices.iter().enumerate() {
            if let Some(c) = *c {
                set.insert(GroundElement::new(i, c));
            }
        }
        set
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn cars(&self) -> usize {
        self.cars
    }

    fn index(&self, e: GroundElement) -> usize {
        assert!(e.call < self.calls && e.car < self.cars, "element {e:?} outside {}×{}", self.calls, self.cars);
        e.call * self.cars + e.car
    }

    pub fn contains(&self, e: GroundElement) -> bool {
        self.x[self.index(e)]
    }

    /// Returns whether the element was newly added.
    pub fn insert(&mut self, e: GroundElement) -> bool {
        let k = self.index(e);
        !std::mem::replace(&mut self.x[k], true)
    }

    pub fn remove(&mut self, e: GroundElement) -> bool {
        let k = self.index(e);
        std::mem::replace(&mut self.x[k], false)
    }

    pub fn with(&self, e: GroundElement) -> Self {
        let mut s = self.clone();
        s.insert(e);
        s
    }

    pub fn len(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.x.contains(&true)
    }

    pub fn iter(&self) -> impl Iterator<Item = GroundElement> + '_ {
        let cars = self.cars;
        self.x.iter().enumerate().filter(|(_, &b)| b).map(move |(k, _)| GroundElement::new(k / cars, k % cars))
    }

    /// The Boolean vector `x_i^c`, call-major.
    pub fn indicator(&self) -> &[bool] {
        &self.x
    }

    /// `|A ∩ E_i|`.
    pub fn block_count(&self, call: usize) -> usize {
        self.x[call * self.cars..(call + 1) * self.cars].iter().filter(|&&b| b).count()
    }

    /// Car of each call if the set is independent; the lowest car otherwise.
    pub fn choices(&self) -> Vec<Option<usize>> {
        (0..self.calls).map(|i| (0..self.cars).find(|&c| self.x[i * self.cars + c])).collect()
    }

    pub fn is_subset(&self, other: &AssignmentSet) -> bool {
        self.x.iter().zip(&other.x).all(|(&a, &b)| !a || b)
    }
}

/// Partition matroid whose blocks are `E_i = {(i, c) : c}` with capacity 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionMatroid {
    pub calls: usize,
    pub cars: usize,
}

impl PartitionMatroid {
    pub fn new(calls: usize, cars: usize) -> Self {
        PartitionMatroid { calls, cars }
    }

    pub fn for_weights(w: &WeightSet) -> Self {
        PartitionMatroid::new(w.calls(), w.cars())
    }

    pub fn capacity(&self, _block: usize) -> usize {
        1
    }

    pub fn block(&self, call: usize) -> impl Iterator<Item = GroundElement> {
        (0..self.cars).map(move |c| GroundElement::new(call, c))
    }

    pub fn ground_set(&self) -> impl Iterator<Item = GroundElement> + '_ {
        (0..self.calls).flat_map(|i| self.block(i))
    }

    pub fn is_independent(&self, a: &AssignmentSet) -> bool {
        (0..self.calls).all(|i| a.block_count(i) <= self.capacity(i))
    }

    /// Whether every block is filled to capacity.
    pub fn is_basis(&self, a: &AssignmentSet) -> bool {
        (0..self.calls).all(|i| a.block_count(i) == self.capacity(i))
    }
}

/// The set function `f = h + h1 + offset` over a fixed weight set.
#[derive(Debug, Clone)]
pub struct Objective {
    weights: WeightSet,
}

impl Objective {
    pub fn new(weights: WeightSet) -> Self {
        Objective { weights }
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn matroid(&self) -> PartitionMatroid {
        PartitionMatroid::for_weights(&self.weights)
    }

    /// Approximate total waiting time of the calls in `a`.
    pub fn g(&self, a: &AssignmentSet) -> f64 {
        let w = &self.weights;
        let mut total = 0.0;
        let mut per_car = vec![0usize; w.cars()];
        let elems: Vec<_> = a.iter().collect();
        for (k, e) in elems.iter().enumerate() {
            total += w.unary(e.call, e.car);
            per_car[e.car] += 1;
            for o in &elems[k + 1..] {
                if o.car == e.car {
                    total += w.pairwise(e.call, o.call, e.car);
                }
            }
        }
        for t in w.higher_order() {
            total += per_car.iter().map(|&m| t.total(m)).sum::<f64>();
        }
        total
    }

    pub fn h(&self, a: &AssignmentSet) -> f64 {
        -self.g(a)
    }

    pub fn h1(&self, a: &AssignmentSet) -> f64 {
        let c = self.weights.cars() as f64;
        -(0..self.weights.calls()).map(|i| self.weights.penalty(i) * (c - a.block_count(i) as f64)).sum::<f64>()
    }

    /// `h(A) + h1(A) + offset`, evaluated as `h(A) + Σ_i p_i·|A ∩ E_i|` so
    /// that the empty set maps to exactly zero.
    pub fn f(&self, a: &AssignmentSet) -> f64 {
        let covered: f64 = (0..self.weights.calls()).map(|i| self.weights.penalty(i) * a.block_count(i) as f64).sum();
        self.h(a) + covered
    }

    /// `f(A ∪ {e}) − f(A)` for `e ∉ A`, computed without re-evaluating `f`.
    pub fn marginal(&self, a: &AssignmentSet, e: GroundElement) -> f64 {
        debug_assert!(!a.contains(e));
        let w = &self.weights;
        let mut m = 0usize;
        let mut pair = 0.0;
        for j in 0..w.calls() {
            if a.contains(GroundElement::new(j, e.car)) {
                m += 1;
                pair += w.pairwise(e.call, j, e.car);
            }
        }
        let ho: f64 = w.higher_order().iter().map(|t| t.marginal(m)).sum();
        w.penalty(e.call) - w.unary(e.call, e.car) - pair - ho
    }
}

/// Greedy output together with the number of marginal-gain evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub set: AssignmentSet,
    pub evaluations: usize,
}

/// Greedy maximization of `f` over the matroid.
///
/// Elements are added until no feasible element remains, zero or negative
/// gains included, so the result is always a basis. Ties go to the smaller
/// call id, then the smaller car id.
pub fn greedy_maximize(objective: &Objective, matroid: &PartitionMatroid) -> AssignmentSet {
    greedy_counted(objective, matroid).set
}

pub fn greedy_counted(objective: &Objective, matroid: &PartitionMatroid) -> GreedyOutcome {
    let w = objective.weights();
    let (n, c) = (matroid.calls, matroid.cars);
    assert_eq!((n, c), (w.calls(), w.cars()), "matroid does not match weight dimensions");
    let mut set = AssignmentSet::empty(n, c);
    let mut assigned = vec![false; n];
    // pair_sum[i * c + car] = Σ pairwise(i, j, car) over calls j already on car.
    let mut pair_sum = vec![0.0; n * c];
    let mut load = vec![0usize; c];
    let mut evaluations = 0;
    for _ in 0..n {
        let mut best: Option<(f64, GroundElement)> = None;
        for i in (0..n).filter(|&i| !assigned[i]) {
            for car in 0..c {
                evaluations += 1;
                let ho: f64 = w.higher_order().iter().map(|t| t.marginal(load[car])).sum();
                let gain = w.penalty(i) - w.unary(i, car) - pair_sum[i * c + car] - ho;
                if best.is_none_or(|(b, _)| gain > b) {
                    best = Some((gain, GroundElement::new(i, car)));
                }
            }
        }
        let Some((_, e)) = best else { break };
        set.insert(e);
        assigned[e.call] = true;
        load[e.car] += 1;
        for j in 0..n {
            if j != e.call {
                pair_sum[j * c + e.car] += w.pairwise(j, e.call, e.car);
            }
        }
    }
    GreedyOutcome { set, evaluations }
}

/// Largest number of complete assignments the exhaustive oracle will visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

/// The complete assignment minimizing `g`, found by enumerating all `C^N`
/// of them. Ties keep the lexicographically first choice vector.
pub fn brute_force_optimal(objective: &Objective, matroid: &PartitionMatroid, budget: u64) -> Result<AssignmentSet> {
    let (n, c) = (matroid.calls, matroid.cars);
    let required = (c as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let w = objective.weights();
    struct Search<'a> {
        w: &'a WeightSet,
        n: usize,
        c: usize,
        choice: Vec<usize>,
        load: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, partial: f64) {
            if i == self.n {
                let ho: f64 = self.w.higher_order().iter().map(|t| self.load.iter().map(|&m| t.total(m)).sum::<f64>()).sum();
                let g = partial + ho;
                if self.best.as_ref().is_none_or(|(b, _)| g < *b) {
                    self.best = Some((g, self.choice.clone()));
                }
                return;
            }
            for car in 0..self.c {
                let add = self.w.unary(i, car) + (0..i).filter(|&j| self.choice[j] == car).map(|j| self.w.pairwise(i, j, car)).sum::<f64>();
                self.choice[i] = car;
                self.load[car] += 1;
                self.go(i + 1, partial + add);
                self.load[car] -= 1;
            }
        }
    }
    let mut s = Search { w, n, c, choice: vec![0; n], load: vec![0; c], best: None };
    s.go(0, 0.0);
    let (_, choice) = s.best.expect("at least one assignment");
    Ok(AssignmentSet::from_choices(c, &choice.into_iter().map(Some).collect::<Vec<_>>()))
}

/// Result of a randomized diminishing-returns check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmodularityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which `Δ(e | A)` exceeded `Δ(e | B)`.
    pub worst_excess: f64,
}

impl SubmodularityReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Absolute tolerance for comparisons of weights in seconds.
pub const TOLERANCE: f64 = 1e-9;

/// Samples `B ⊆ A ⊆ E` and `e ∉ A` and checks
/// `f(A ∪ {e}) − f(A) ≤ f(B ∪ {e}) − f(B)` by direct evaluation.
pub fn check_submodular(objective: &Objective, trials: usize, seed: u64) -> SubmodularityReport {
    let m = objective.matroid();
    let ground: Vec<_> = m.ground_set().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SubmodularityReport { trials: 0, violations: 0, worst_excess: 0.0 };
    for _ in 0..trials {
        let e = ground[rng.random_range(0..ground.len())];
        let p_a: f64 = rng.random();
        let p_b: f64 = rng.random();
        let mut a = AssignmentSet::empty(m.calls, m.cars);
        let mut b = a.clone();
        for &x in ground.iter().filter(|&&x| x != e) {
            if rng.random_bool(p_a) {
                a.insert(x);
                if rng.random_bool(p_b) {
                    b.insert(x);
                }
            }
        }
        let da = objective.f(&a.with(e)) - objective.f(&a);
        let db = objective.f(&b.with(e)) - objective.f(&b);
        report.trials += 1;
        if da > db + TOLERANCE {
            report.violations += 1;
            report.worst_excess = report.worst_excess.max(da - db);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waiting::CardinalityPenalty;

    fn two_by_two() -> Objective {
        let ws = WeightSet::from_parts(
            vec![vec![10.0, 20.0], vec![15.0, 15.0]],
            vec![vec![vec![0.0, 8.0], vec![8.0, 0.0]], vec![vec![0.0, 0.0], vec![0.0, 0.0]]],
            vec![],
        )
        .unwrap();
        Objective::new(ws)
    }

    fn e(i: usize, c: usize) -> GroundElement {
        GroundElement::new(i, c)
    }

    #[test]
    fn objective_values_on_two_by_two() {
        let obj = two_by_two();
        let empty = AssignmentSet::empty(2, 2);
        assert_eq!(obj.f(&empty), 0.0);
        assert_eq!(obj.g(&empty), 0.0);
        assert_eq!(obj.h1(&empty), -obj.weights().offset());
        let same = AssignmentSet::from_choices(2, &[Some(0), Some(0)]);
        assert_eq!(obj.g(&same), 33.0);
        assert_eq!(obj.h(&same), -33.0);
        let split = AssignmentSet::from_choices(2, &[Some(0), Some(1)]);
        assert_eq!(obj.g(&split), 25.0);
        assert_eq!(obj.h1(&split), -(43.0));
        assert_eq!(obj.f(&split), obj.h(&split) + 43.0);
    }

    #[test]
    fn greedy_trace_on_two_by_two() {
        let obj = two_by_two();
        let m = obj.matroid();
        assert_eq!(obj.marginal(&AssignmentSet::empty(2, 2), e(0, 0)), 10.0);
        let out = greedy_counted(&obj, &m);
        assert_eq!(out.set.choices(), vec![Some(0), Some(1)]);
        assert_eq!(obj.g(&out.set), 25.0);
        assert_eq!(out.evaluations, 4 + 2);
        let opt = brute_force_optimal(&obj, &m, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(opt, out.set);
    }

    #[test]
    fn single_call_prefers_cheaper_car() {
        let ws = WeightSet::from_parts(vec![vec![5.0, 10.0]], vec![vec![vec![0.0]], vec![vec![0.0]]], vec![]).unwrap();
        let obj = Objective::new(ws);
        assert_eq!(greedy_maximize(&obj, &obj.matroid()).choices(), vec![Some(0)]);
    }

    #[test]
    fn independence() {
        let m = PartitionMatroid::new(2, 2);
        let mut a = AssignmentSet::empty(2, 2);
        assert!(m.is_independent(&a));
        a.insert(e(0, 0));
        a.insert(e(1, 1));
        assert!(m.is_independent(&a) && m.is_basis(&a));
        a.insert(e(0, 1));
        assert!(!m.is_independent(&a));
    }

    #[test]
    fn budget_is_enforced() {
        let n = 21;
        let ws = WeightSet::from_parts(vec![vec![1.0, 1.0]; n], vec![vec![vec![0.0; n]; n]; 2], vec![]).unwrap();
        let obj = Objective::new(ws);
        let err = brute_force_optimal(&obj, &obj.matroid(), DEFAULT_ENUMERATION_BUDGET).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { required: 2097152, .. }));
    }

    #[test]
    fn negative_pairwise_breaks_submodularity() {
        let ws = WeightSet::from_parts(
            vec![vec![10.0, 10.0], vec![10.0, 10.0]],
            vec![vec![vec![0.0, -5.0], vec![-5.0, 0.0]], vec![vec![0.0, 0.0], vec![0.0, 0.0]]],
            vec![],
        )
        .unwrap();
        let report = check_submodular(&Objective::new(ws), 2000, 7);
        assert!(report.violations > 0);
        assert!(check_submodular(&two_by_two(), 2000, 7).ok());
    }

    #[test]
    fn higher_order_marginals_match_direct_evaluation() {
        let n = 5;
        let ws = WeightSet::from_parts(
            vec![vec![1.0, 2.0]; n],
            vec![vec![vec![0.5; n]; n]; 2].into_iter().map(|m| (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { m[i][j] }).collect()).collect()).collect(),
            vec![CardinalityPenalty { k: 3, penalty: 4.0 }],
        )
        .unwrap();
        let obj = Objective::new(ws);
        let mut a = AssignmentSet::empty(n, 2);
        for i in 0..n - 1 {
            let x = e(i, 0);
            let direct = obj.f(&a.with(x)) - obj.f(&a);
            assert!((obj.marginal(&a, x) - direct).abs() < 1e-9);
            a.insert(x);
        }
        assert!(check_submodular(&obj, 1000, 3).ok());
    }
}
