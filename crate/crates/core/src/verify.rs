//! Randomized property suites over realistic system states.
//!
//! Each suite draws car states and hall calls, builds weights with the
//! production code and checks one structural property, reporting the number
//! of cases and violations.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::building::{BuildingConfig, CarEnv, Direction, Floor, FloorSet, Heading};
use crate::car::{CarState, DoorStage, Phase, Pickup, Trip};
use crate::error::Result;
use crate::schedulers::FixedScheduler;
use crate::sim::{run, EpochView, InitialCar, Scheduler, SimOptions};
use crate::submodular::{brute_force_optimal, check_submodular, greedy_maximize, AssignmentSet, Objective, DEFAULT_ENUMERATION_BUDGET, TOLERANCE};
use crate::traffic::Arrival;
use crate::waiting::{build_weights, pairwise_weight, CarSnapshot, DestinationDistribution, HallCall, WeightConfig, WeightSet};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest violation magnitude seen.
    pub worst: f64,
    /// Cases discarded because they did not meet the suite's preconditions.
    pub skipped: usize,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport { name: name.into(), cases: 0, violations: 0, worst: 0.0, skipped: 0 }
    }

    fn record(&mut self, excess: f64) {
        self.cases += 1;
        if excess > 0.0 {
            self.violations += 1;
            self.worst = self.worst.max(excess);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.cases > 0
    }
}

/// Size limits for random systems.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_floors: usize,
    pub max_cars: usize,
    pub max_calls: usize,
}

fn random_direction(rng: &mut impl Rng) -> Direction {
    if rng.random_bool(0.5) {
        Direction::Up
    } else {
        Direction::Down
    }
}

/// A car in an arbitrary reachable-looking state: parked, moving part-way
/// through a trip, or in some door phase, with random car calls, locked
/// pickups and load.
pub fn random_car(rng: &mut impl Rng, env: &CarEnv, index: usize, now: f64, capacity: u32) -> CarSnapshot {
    let floors = env.floors;
    let mut state = CarState::parked(rng.random_range(0..floors), capacity);
    match rng.random_range(0..4) {
        0 => {}
        1 => {
            let from = rng.random_range(0..floors);
            let mut to = rng.random_range(0..floors - 1);
            if to >= from {
                to += 1;
            }
            let profile = *env.table.profile(from.abs_diff(to));
            let elapsed = rng.random_range(0.0..profile.duration());
            state.phase = Phase::Moving(Trip { from, to, start: now - elapsed, profile });
            state.heading = Direction::between(from, to).expect("distinct floors").into();
            state.car_calls.insert(to);
        }
        _ => {
            let floor = state.floor();
            let (stage, span) = match rng.random_range(0..3) {
                0 => (DoorStage::Opening, env.doors.open_time),
                1 => (DoorStage::Open, env.doors.dwell_time),
                _ => (DoorStage::Closing, env.doors.close_time),
            };
            state.phase = Phase::Doors { floor, stage, since: now - rng.random_range(0.0..span) };
            state.lantern = rng.random_bool(0.7).then(|| random_direction(rng));
            state.heading = state.lantern.map(Heading::from).unwrap_or(Heading::Idle);
        }
    }
    if !state.is_moving() && state.heading == Heading::Idle && rng.random_bool(0.3) {
        state.heading = random_direction(rng).into();
    }
    let here = match state.phase {
        Phase::Moving(_) => None,
        _ => Some(state.floor()),
    };
    for f in 0..floors {
        if Some(f) != here && rng.random_bool(0.2) {
            state.car_calls.insert(f);
        }
    }
    state.load = state.car_calls.len().min(capacity as usize) as u32;
    if state.load > 0 && rng.random_bool(0.5) {
        state.load = rng.random_range(state.load..capacity.saturating_sub(1).max(state.load + 1));
    }
    CarSnapshot::new(index, now, state)
}

/// Distinct hall calls with existing buttons.
pub fn random_calls(rng: &mut impl Rng, floors: usize, n: usize, now: f64, taken: &[(Floor, Direction)]) -> Vec<HallCall> {
    let b = BuildingConfig::new(floors, 1);
    let mut slots: Vec<(Floor, Direction)> = (0..floors)
        .flat_map(|f| [(f, Direction::Up), (f, Direction::Down)])
        .filter(|&(f, d)| b.has_button(f, d) && !taken.contains(&(f, d)))
        .collect();
    slots.shuffle(rng);
    slots
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(k, (f, d))| HallCall::new(k as u64, f, d, now - rng.random_range(0.0..30.0)))
        .collect()
}

/// Random cars, locked pickups and unlocked calls for one scheduling instant.
pub fn random_system(rng: &mut impl Rng, limits: Limits) -> (CarEnv, Vec<CarSnapshot>, Vec<HallCall>) {
    let floors = rng.random_range(3..=limits.max_floors);
    let cars = rng.random_range(1..=limits.max_cars);
    let env = BuildingConfig::new(floors, cars).env();
    let now = 100.0;
    let mut snaps: Vec<CarSnapshot> = (0..cars).map(|k| random_car(rng, &env, k, now, 16)).collect();
    let n = rng.random_range(1..=limits.max_calls.min(2 * floors - 2));
    let mut calls = random_calls(rng, floors, n, now, &[]);
    // A few extra calls become locked pickups of random cars.
    let locked = rng.random_range(0..=2usize);
    let taken: Vec<_> = calls.iter().map(|c| (c.floor, c.direction)).collect();
    for extra in random_calls(rng, floors, locked, now, &taken) {
        let car = rng.random_range(0..cars);
        snaps[car].state.pickups.push(Pickup { call: 1000 + extra.id, floor: extra.floor, direction: extra.direction, press_time: extra.press_time, destination: None });
    }
    for (k, c) in calls.iter_mut().enumerate() {
        c.id = k as u64;
    }
    for s in &mut snaps {
        s.state.refresh(&env, now, &mut Vec::new());
    }
    (env, snaps, calls)
}

fn random_config(rng: &mut impl Rng) -> WeightConfig {
    WeightConfig { coincident_bonus: rng.random_bool(0.5), ..WeightConfig::default() }
}

/// Draws systems until `build_weights` accepts one.
pub fn random_weights(rng: &mut impl Rng, limits: Limits) -> Result<WeightSet> {
    let mut last = None;
    for _ in 0..100 {
        let (env, cars, calls) = random_system(rng, limits);
        match build_weights(&env, &cars, &calls, &DestinationDistribution::Uniform, &random_config(rng)) {
            Ok(ws) => return Ok(ws),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Diminishing returns on weight sets from random states.
pub fn submodularity_suite(sets: usize, trials_per_set: usize, seed: u64, limits: Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("submodularity");
    for k in 0..sets {
        let obj = Objective::new(random_weights(&mut rng, limits)?);
        let r = check_submodular(&obj, trials_per_set, seed ^ (k as u64 + 1));
        report.cases += 1;
        if !r.ok() {
            report.violations += 1;
            report.worst = report.worst.max(r.worst_excess);
        }
    }
    Ok(report)
}

/// `f(∅) = 0` exactly and `f` never decreases along random maximal chains of the
/// ground set.
pub fn monotonicity_suite(chains: usize, seed: u64, limits: Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("monotonicity");
    for _ in 0..chains {
        let obj = Objective::new(random_weights(&mut rng, limits)?);
        let m = obj.matroid();
        let mut order: Vec<_> = m.ground_set().collect();
        order.shuffle(&mut rng);
        let mut a = AssignmentSet::empty(m.calls, m.cars);
        let mut prev = obj.f(&a);
        let mut excess = if prev == 0.0 { 0.0 } else { prev.abs().max(f64::MIN_POSITIVE) };
        for e in order {
            a.insert(e);
            let v = obj.f(&a);
            excess = excess.max(prev - v - TOLERANCE);
            prev = v;
        }
        report.record(if excess > 0.0 { excess } else { 0.0 });
    }
    Ok(report)
}

/// Greedy against the exhaustive optimum: the shifted half-bound and the
/// basis property. Returns (bound report, basis report).
pub fn greedy_bound_suite(instances: usize, seed: u64, limits: Limits) -> Result<(SuiteReport, SuiteReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = SuiteReport::new("greedy half-bound");
    let mut basis = SuiteReport::new("greedy basis");
    for _ in 0..instances {
        let obj = Objective::new(random_weights(&mut rng, limits)?);
        let m = obj.matroid();
        let greedy = greedy_maximize(&obj, &m);
        let opt = brute_force_optimal(&obj, &m, DEFAULT_ENUMERATION_BUDGET)?;
        let shift: f64 = obj.weights().penalties().iter().sum();
        let lhs = obj.h(&greedy) + shift;
        let rhs = 0.5 * (obj.h(&opt) + shift);
        bound.record((rhs - lhs - TOLERANCE).max(0.0));
        basis.record(if m.is_basis(&greedy) { 0.0 } else { 1.0 });
    }
    Ok((bound, basis))
}

/// `w_ij^c ≥ 0` on random (car, call pair) states.
pub fn pairwise_nonnegativity_suite(cases: usize, seed: u64, limits: Limits) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("pairwise nonnegativity");
    let one_car = Limits { max_cars: 1, max_calls: 2, ..limits };
    while report.cases < cases {
        let (env, cars, calls) = random_system(&mut rng, one_car);
        if calls.len() < 2 {
            report.skipped += 1;
            continue;
        }
        let w = pairwise_weight(&env, &cars[0], &calls[0], &calls[1], &DestinationDistribution::Uniform)?;
        report.record((-w - TOLERANCE).max(0.0));
    }
    Ok(report)
}

/// Records the first scheduling view, then applies a fixed assignment.
struct Recording {
    inner: FixedScheduler,
    first: Option<(CarEnv, Vec<CarSnapshot>, Vec<HallCall>)>,
}

impl Scheduler for Recording {
    fn name(&self) -> String {
        "recording".into()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        if self.first.is_none() {
            self.first = Some((view.env.clone(), view.cars.clone(), view.calls.clone()));
        }
        self.inner.assign(view)
    }
}

/// Result of one frozen scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessCase {
    /// `g` of the applied assignment with point-mass destinations.
    pub predicted: f64,
    /// Sum of simulated waiting times.
    pub simulated: f64,
}

/// A frozen scenario: parked cars, some carrying passengers, and hall calls
/// pressed together at time 0 with one passenger each, at most two per car.
/// Returns `None` when a passenger boarded a car other than the assigned
/// one, which puts the scenario outside the model.
pub fn exactness_case(rng: &mut impl Rng, max_floors: usize, max_cars: usize) -> Result<Option<ExactnessCase>> {
    let floors = rng.random_range(4..=max_floors);
    let cars = rng.random_range(1..=max_cars);
    let building = BuildingConfig::new(floors, cars);
    let initial: Vec<InitialCar> = (0..cars)
        .map(|_| {
            let floor = rng.random_range(0..floors);
            let mut onboard = Vec::new();
            for _ in 0..rng.random_range(0..=2) {
                let mut d = rng.random_range(0..floors - 1);
                if d >= floor {
                    d += 1;
                }
                onboard.push(d);
            }
            InitialCar { floor, onboard }
        })
        .collect();
    let n = rng.random_range(1..=2 * cars);
    let calls = random_calls(rng, floors, n, 0.0, &[]);
    let mut slots: Vec<usize> = (0..cars).flat_map(|c| [c, c]).collect();
    slots.shuffle(rng);
    let mut by_call = BTreeMap::new();
    let mut table = BTreeMap::new();
    let mut traffic = Vec::new();
    for (k, c) in calls.iter().enumerate() {
        by_call.insert((c.floor, c.direction), slots[k]);
        let dest = match c.direction {
            Direction::Up => rng.random_range(c.floor + 1..floors),
            Direction::Down => rng.random_range(0..c.floor),
        };
        table.insert((c.floor, c.direction), vec![(dest, 1.0)]);
        traffic.push(Arrival { id: k as u64, arrival_time: 0.0, origin: c.floor, destination: dest });
    }
    let mut sched = Recording { inner: FixedScheduler { by_call: by_call.clone() }, first: None };
    let opts = SimOptions { horizon: 1.0, initial_cars: initial, ..SimOptions::default() };
    let out = run(&building, &traffic, &mut sched, &opts)?;
    for p in &out.passengers {
        let dir = Direction::between(p.origin, p.destination).expect("distinct floors");
        if p.car != Some(by_call[&(p.origin, dir)]) {
            return Ok(None);
        }
    }
    let (env, snaps, view_calls) = sched.first.expect("scheduler ran at time 0");
    let dist = DestinationDistribution::table(table)?;
    let config = WeightConfig { coincident_bonus: false, ..WeightConfig::default() };
    let ws = build_weights(&env, &snaps, &view_calls, &dist, &config)?;
    let choices: Vec<Option<usize>> = view_calls.iter().map(|c| Some(by_call[&(c.floor, c.direction)])).collect();
    let obj = Objective::new(ws);
    let predicted = obj.g(&AssignmentSet::from_choices(cars, &choices));
    let simulated = out.stats.waits.iter().sum();
    Ok(Some(ExactnessCase { predicted, simulated }))
}

/// `g` against simulated total waiting on `cases` accepted frozen scenarios.
pub fn exactness_suite(cases: usize, seed: u64, tolerance: f64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("exactness of g");
    while report.cases < cases {
        match exactness_case(&mut rng, 12, 3)? {
            Some(c) => report.record(((c.predicted - c.simulated).abs() - tolerance).max(0.0)),
            None => report.skipped += 1,
        }
    }
    Ok(report)
}

/// Floors in a set, for diagnostics.
pub fn floors_of(set: FloorSet) -> Vec<Floor> {
    set.iter().collect()
}
