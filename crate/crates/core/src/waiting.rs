//! Waiting-time model: unary and pairwise weights, bonuses and penalties.
//!
//! Weights are obtained by running the car's own control logic forward on a
//! frozen copy of its state (no new arrivals), so an estimate is exactly the
//! waiting time the simulator would produce if nothing else changed.
//!
//! * unary `w_i^c`: time until car `c` opens its doors for call `i` alone;
//! * pairwise `w_ij^c`: expected extra waiting when `i` and `j` share car
//!   `c`, the expectation running over the destination of whichever call the
//!   car picks up first;
//! * `p_i`: per-call penalty that makes every complete assignment beat any
//!   partial one.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::building::{CarEnv, Direction, Floor};
use crate::car::{CarState, Pickup, Transition};
use crate::error::{domain, Error, Result};
use crate::kinematics::CarKinematicState;

/// A pending pickup request at a landing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallCall {
    pub id: u64,
    pub floor: Floor,
    pub direction: Direction,
    pub press_time: f64,
    pub assigned_car: Option<usize>,
    /// Set once the assigned car is about to serve the call.
    pub locked: bool,
}

impl HallCall {
    pub fn new(id: u64, floor: Floor, direction: Direction, press_time: f64) -> Self {
        HallCall { id, floor, direction, press_time, assigned_car: None, locked: false }
    }

    fn as_stop(&self) -> PlannedStop {
        PlannedStop { floor: self.floor, direction: self.direction, press_time: self.press_time, destination: None }
    }
}

/// Frozen state of one car at a scheduling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CarSnapshot {
    pub car_index: usize,
    /// Simulation time at which the snapshot was taken.
    pub time: f64,
    /// Control state; its pickups are the calls the car must serve regardless
    /// of the assignment being decided.
    pub state: CarState,
}

impl CarSnapshot {
    pub fn new(car_index: usize, time: f64, state: CarState) -> Self {
        CarSnapshot { car_index, time, state }
    }

    pub fn kinematic(&self, env: &CarEnv) -> CarKinematicState {
        self.state.kinematic(env, self.time)
    }

    pub fn validate(&self, env: &CarEnv) -> Result<()> {
        if self.state.load > self.state.capacity {
            return domain(format!("car {} load {} exceeds capacity", self.car_index, self.state.load));
        }
        if self.state.car_calls.max().is_some_and(|f| f >= env.floors) {
            return domain(format!("car {} has a car call outside the building", self.car_index));
        }
        Ok(())
    }
}

/// A pickup to add to a car's plan. `destination` reveals where the
/// passenger goes once aboard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedStop {
    pub floor: Floor,
    pub direction: Direction,
    pub press_time: f64,
    pub destination: Option<Floor>,
}

/// Probabilities of destination floors given the origin and direction of a
/// hall call.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DestinationDistribution {
    /// Every floor beyond the origin in the call's direction is equally likely.
    #[default]
    Uniform,
    Table(BTreeMap<(Floor, Direction), Vec<(Floor, f64)>>),
}

impl DestinationDistribution {
    /// Explicit table; every row must be a probability vector over floors in
    /// the call's direction.
    pub fn table(rows: BTreeMap<(Floor, Direction), Vec<(Floor, f64)>>) -> Result<Self> {
        for (&(origin, dir), row) in &rows {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&(_, w)| !(0.0..=1.0).contains(&w)) {
                return domain(format!("destination weights for ({origin}, {dir}) sum to {sum}"));
            }
            if row.iter().any(|&(f, _)| Direction::between(origin, f) != Some(dir)) {
                return domain(format!("destination outside travel direction for ({origin}, {dir})"));
            }
        }
        Ok(DestinationDistribution::Table(rows))
    }

    /// Candidate destinations with their probabilities.
    pub fn candidates(&self, floors: usize, origin: Floor, dir: Direction) -> Result<Vec<(Floor, f64)>> {
        let out = match self {
            DestinationDistribution::Uniform => {
                let set: Vec<Floor> = match dir {
                    Direction::Up => (origin + 1..floors).collect(),
                    Direction::Down => (0..origin).collect(),
                };
                let w = 1.0 / set.len().max(1) as f64;
                set.into_iter().map(|f| (f, w)).collect::<Vec<_>>()
            }
            DestinationDistribution::Table(rows) => rows.get(&(origin, dir)).cloned().unwrap_or_default(),
        };
        if out.is_empty() || out.iter().any(|&(f, _)| f >= floors) {
            return domain(format!("no valid destinations for call at floor {origin} going {dir}"));
        }
        Ok(out)
    }
}

/// Knobs of the weight construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    /// When false, pairwise and higher-order terms are all zero.
    pub pairwise: bool,
    pub coincident_bonus: bool,
    /// Load at which the capacity penalty applies; defaults to capacity − 1.
    pub capacity_threshold: Option<u32>,
    pub penalty_large: f64,
    /// (k, penalty) pairs, k ≥ 3.
    pub higher_order: Vec<(usize, f64)>,
}

/// Default capacity penalty, in seconds.
pub const PENALTY_LARGE: f64 = 1.0e4;

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            pairwise: true,
            coincident_bonus: true,
            capacity_threshold: None,
            penalty_large: PENALTY_LARGE,
            higher_order: Vec::new(),
        }
    }
}

/// Penalty added for every `k`-subset of calls sharing one car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardinalityPenalty {
    pub k: usize,
    pub penalty: f64,
}

/// Validates a higher-order configuration.
pub fn higher_order_terms(config: &[(usize, f64)]) -> Result<Vec<CardinalityPenalty>> {
    config
        .iter()
        .map(|&(k, penalty)| {
            if k < 3 {
                domain(format!("higher-order terms need k >= 3, got {k}"))
            } else if !(penalty.is_finite() && penalty >= 0.0) {
                domain(format!("higher-order penalty must be >= 0, got {penalty}"))
            } else {
                Ok(CardinalityPenalty { k, penalty })
            }
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl CardinalityPenalty {
    /// Total penalty for `m` calls on one car.
    pub fn total(&self, m: usize) -> f64 {
        self.penalty * binomial(m, self.k)
    }

    /// Increase in [`Self::total`] when the car goes from `m` to `m + 1` calls.
    pub fn marginal(&self, m: usize) -> f64 {
        self.penalty * binomial(m, self.k - 1)
    }
}

/// Every weight of one scheduling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    n: usize,
    c: usize,
    unary: Vec<f64>,
    pairwise: Vec<f64>,
    higher_order: Vec<CardinalityPenalty>,
    penalties: Vec<f64>,
    offset: f64,
}

impl WeightSet {
    /// Assembles a weight set from raw tables and derives the penalties.
    ///
    /// `unary[i][c]`; `pairwise[c][i][j]` must be symmetric with a zero
    /// diagonal. No sign checks are made, so hand-made (even invalid)
    /// instances can be built.
    pub fn from_parts(unary: Vec<Vec<f64>>, pairwise: Vec<Vec<Vec<f64>>>, higher_order: Vec<CardinalityPenalty>) -> Result<Self> {
        let n = unary.len();
        let c = unary.first().map_or(0, Vec::len);
        if n == 0 || c == 0 || unary.iter().any(|row| row.len() != c) {
            return domain("unary table must be a non-empty N×C matrix");
        }
        if pairwise.len() != c || pairwise.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return domain("pairwise table must be C×N×N");
        }
        let mut flat_pair = vec![0.0; c * n * n];
        for (car, m) in pairwise.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if i != j && m[i][j] != m[j][i] {
                        return domain(format!("pairwise[{car}] not symmetric at ({i}, {j})"));
                    }
                    if i != j {
                        flat_pair[(car * n + i) * n + j] = m[i][j];
                    }
                }
            }
        }
        let flat_unary = unary.into_iter().flatten().collect();
        Ok(Self::assemble(n, c, flat_unary, flat_pair, higher_order))
    }

    fn assemble(n: usize, c: usize, unary: Vec<f64>, pairwise: Vec<f64>, higher_order: Vec<CardinalityPenalty>) -> Self {
        let mut ws = WeightSet { n, c, unary, pairwise, higher_order, penalties: vec![0.0; n], offset: 0.0 };
        ws.penalties = (0..n).map(|i| (0..c).map(|car| ws.row_total(i, car)).fold(f64::NEG_INFINITY, f64::max)).collect();
        ws.offset = c as f64 * ws.penalties.iter().sum::<f64>();
        ws
    }

    /// `w_i^c + Σ_{j≠i} w_ij^c`.
    fn row_total(&self, i: usize, car: usize) -> f64 {
        self.unary(i, car) + (0..self.n).filter(|&j| j != i).map(|j| self.pairwise(i, j, car)).sum::<f64>()
    }

    pub fn calls(&self) -> usize {
        self.n
    }

    pub fn cars(&self) -> usize {
        self.c
    }

    pub fn unary(&self, call: usize, car: usize) -> f64 {
        self.unary[call * self.c + car]
    }

    pub fn pairwise(&self, i: usize, j: usize, car: usize) -> f64 {
        self.pairwise[(car * self.n + i) * self.n + j]
    }

    pub fn higher_order(&self) -> &[CardinalityPenalty] {
        &self.higher_order
    }

    /// Higher-order terms spelled out as (car, call subset, penalty).
    pub fn higher_order_terms(&self) -> Vec<(usize, Vec<usize>, f64)> {
        fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                subsets(n, k, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut terms = Vec::new();
        for t in &self.higher_order {
            let mut sets = Vec::new();
            subsets(self.n, t.k, 0, &mut Vec::new(), &mut sets);
            for car in 0..self.c {
                for s in &sets {
                    terms.push((car, s.clone(), t.penalty));
                }
            }
        }
        terms
    }

    /// Feasibility penalties `p_i = max_c (w_i^c + Σ_{j≠i} w_ij^c)`.
    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn penalty(&self, call: usize) -> f64 {
        self.penalties[call]
    }

    /// `C · Σ p_i`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Sub-instance on a subset of calls and cars, with each unary weight
    /// increased by the pairwise cost against calls already fixed on that
    /// car. Used to re-run the optimizer for calls stripped from full cars.
    pub fn restrict(&self, calls: &[usize], cars: &[usize], fixed: &[(usize, usize)]) -> Result<WeightSet> {
        let unary = calls
            .iter()
            .map(|&i| {
                cars.iter()
                    .map(|&car| {
                        let extra: f64 = fixed.iter().filter(|&&(_, fc)| fc == car).map(|&(j, _)| self.pairwise(i, j, car)).sum();
                        self.unary(i, car) + extra
                    })
                    .collect()
            })
            .collect();
        let pairwise = cars
            .iter()
            .map(|&car| calls.iter().map(|&i| calls.iter().map(|&j| if i == j { 0.0 } else { self.pairwise(i, j, car) }).collect()).collect())
            .collect();
        WeightSet::from_parts(unary, pairwise, self.higher_order.clone())
    }
}

const EXTRA_TAG: u64 = u64::MAX - 1024;

/// Runs a car's control logic forward from a snapshot, reporting each
/// pickup as its doors finish opening.
struct Planner<'e> {
    env: &'e CarEnv,
    state: CarState,
    pending: VecDeque<(f64, Vec<Pickup>)>,
    buf: Vec<Transition>,
    steps: usize,
}

const PLAN_STEP_LIMIT: usize = 10_000;

impl<'e> Planner<'e> {
    fn new(env: &'e CarEnv, snapshot: &CarSnapshot, extra: &[PlannedStop]) -> Result<Self> {
        let mut state = snapshot.state.clone();
        for (k, s) in extra.iter().enumerate() {
            if s.floor >= env.floors || s.destination.is_some_and(|d| d >= env.floors) {
                return domain(format!("stop floor {} outside building of {} floors", s.floor, env.floors));
            }
            state.pickups.push(Pickup {
                call: EXTRA_TAG + k as u64,
                floor: s.floor,
                direction: s.direction,
                press_time: s.press_time,
                destination: s.destination,
            });
        }
        let mut planner = Planner { env, state, pending: VecDeque::new(), buf: Vec::new(), steps: 0 };
        planner.state.refresh(env, snapshot.time, &mut planner.buf);
        planner.collect(snapshot.time);
        Ok(planner)
    }

    fn collect(&mut self, now: f64) {
        for t in self.buf.drain(..) {
            if let Transition::Service { served, .. } = t {
                if !served.is_empty() {
                    self.pending.push_back((now, served));
                }
            }
        }
    }

    /// Next instant at which pickups are served.
    fn next_service(&mut self) -> Result<(f64, Vec<Pickup>)> {
        loop {
            if let Some(s) = self.pending.pop_front() {
                return Ok(s);
            }
            self.steps += 1;
            let Some(t) = self.state.next_event_time(self.env).filter(|_| self.steps < PLAN_STEP_LIMIT) else {
                return Err(Error::PlanDiverged(self.steps));
            };
            self.state.step(self.env, t, &mut self.buf);
            self.collect(t);
        }
    }
}

fn extra_index(p: &Pickup) -> Option<usize> {
    (p.call >= EXTRA_TAG).then(|| (p.call - EXTRA_TAG) as usize)
}

/// Arrival time (doors fully open) at each extra pickup, measured from the
/// snapshot time, when the car serves its current commitments plus `extra`.
pub fn service_plan(env: &CarEnv, car: &CarSnapshot, extra: &[PlannedStop]) -> Result<Vec<f64>> {
    let mut planner = Planner::new(env, car, extra)?;
    let mut times = vec![f64::NAN; extra.len()];
    let mut left = extra.len();
    while left > 0 {
        let (t, served) = planner.next_service()?;
        for k in served.iter().filter_map(extra_index) {
            times[k] = t - car.time;
            left -= 1;
        }
    }
    Ok(times)
}

/// Waiting time for `car` to pick up `call` with every other pending hall
/// call ignored.
pub fn unary_weight(env: &CarEnv, car: &CarSnapshot, call: &HallCall) -> Result<f64> {
    Ok(service_plan(env, car, &[call.as_stop()])?[0])
}

/// Expected excess waiting when `call_i` and `call_j` share `car`, beyond
/// their unary weights.
pub fn pairwise_weight(env: &CarEnv, car: &CarSnapshot, call_i: &HallCall, call_j: &HallCall, dist: &DestinationDistribution) -> Result<f64> {
    let w_i = unary_weight(env, car, call_i)?;
    let w_j = unary_weight(env, car, call_j)?;
    Ok(joint_total(env, car, call_i, call_j, dist)? - w_i - w_j)
}

/// Expected total waiting of two calls served by one car.
fn joint_total(env: &CarEnv, car: &CarSnapshot, call_i: &HallCall, call_j: &HallCall, dist: &DestinationDistribution) -> Result<f64> {
    if call_i.id == call_j.id || (call_i.floor == call_j.floor && call_i.direction == call_j.direction) {
        return domain("pairwise weight needs two distinct hall calls");
    }
    let calls = [call_i, call_j];
    let mut planner = Planner::new(env, car, &[call_i.as_stop(), call_j.as_stop()])?;
    let (first_time, first) = loop {
        let (t, served) = planner.next_service()?;
        if let Some(k) = served.iter().find_map(extra_index) {
            // Both extra calls cannot be served by one door opening: they
            // differ in floor or in direction.
            break (t, k);
        }
    };
    let first_call = calls[first];
    let mut expected = 0.0;
    // Destinations the car already stops at all lead to the same branch.
    let mut known: Option<f64> = None;
    for (dest, prob) in dist.candidates(env.floors, first_call.floor, first_call.direction)? {
        let existing = planner.state.car_calls.contains(dest);
        if let Some(t) = known.filter(|_| existing) {
            expected += prob * ((first_time - car.time) + (t - car.time));
            continue;
        }
        let mut branch = Planner {
            env,
            state: planner.state.clone(),
            pending: planner.pending.clone(),
            buf: Vec::new(),
            steps: planner.steps,
        };
        branch.state.car_calls.insert(dest);
        let second_time = loop {
            let (t, served) = branch.next_service()?;
            if served.iter().any(|p| extra_index(p) == Some(1 - first)) {
                break t;
            }
        };
        if existing {
            known = Some(second_time);
        }
        expected += prob * ((first_time - car.time) + (second_time - car.time));
    }
    Ok(expected)
}

/// Coincident-call bonus: reduces a unary weight when the car already has a
/// car call for the hall call's floor.
pub fn apply_coincident_bonus(w: f64, coincident: bool) -> f64 {
    if coincident {
        w - (0.20 * w).min(10.0)
    } else {
        w
    }
}

/// Extra unary cost for a car at or above the load threshold.
pub fn capacity_penalty(car: &CarSnapshot, config: &WeightConfig) -> f64 {
    let threshold = config.capacity_threshold.unwrap_or(car.state.capacity.saturating_sub(1));
    if car.state.load >= threshold {
        config.penalty_large
    } else {
        0.0
    }
}

/// Builds all weights for one scheduling instant.
pub fn build_weights(env: &CarEnv, cars: &[CarSnapshot], calls: &[HallCall], dist: &DestinationDistribution, config: &WeightConfig) -> Result<WeightSet> {
    if calls.is_empty() || cars.is_empty() {
        return domain("need at least one hall call and one car");
    }
    for (a, x) in calls.iter().enumerate() {
        if calls[..a].iter().any(|y| y.floor == x.floor && y.direction == x.direction) {
            return Err(Error::DuplicateCall { floor: x.floor, direction: x.direction });
        }
    }
    for car in cars {
        car.validate(env)?;
    }
    let higher_order = if config.pairwise { higher_order_terms(&config.higher_order)? } else { Vec::new() };
    let (n, c) = (calls.len(), cars.len());

    let mut raw = vec![0.0; n * c];
    let mut unary = vec![0.0; n * c];
    let penalised: Vec<bool> = cars.iter().map(|car| capacity_penalty(car, config) > 0.0).collect();
    for (i, call) in calls.iter().enumerate() {
        for (k, car) in cars.iter().enumerate() {
            let w = unary_weight(env, car, call)?;
            raw[i * c + k] = w;
            let coincident = config.coincident_bonus && car.state.car_calls.contains(call.floor);
            unary[i * c + k] = apply_coincident_bonus(w, coincident) + capacity_penalty(car, config);
        }
    }

    let mut pairwise = vec![0.0; c * n * n];
    if config.pairwise {
        for (k, car) in cars.iter().enumerate() {
            for i in 0..n {
                for j in i + 1..n {
                    let total = joint_total(env, car, &calls[i], &calls[j], dist)?;
                    let w = total - raw[i * c + k] - raw[j * c + k];
                    pairwise[(k * n + i) * n + j] = w;
                    pairwise[(k * n + j) * n + i] = w;
                }
            }
        }
    }

    let ws = WeightSet::assemble(n, c, unary, pairwise, higher_order);
    if penalised.iter().any(|&p| p) {
        let honest = (0..n)
            .flat_map(|i| (0..c).filter(|&k| !penalised[k]).map(move |k| (i, k)))
            .map(|(i, k)| ws.row_total(i, k))
            .fold(0.0, f64::max);
        if config.penalty_large <= honest {
            return Err(Error::PenaltyTooSmall { penalty: config.penalty_large, honest });
        }
    }
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::{BuildingConfig, Heading};
    use crate::car::{Phase, Trip};
    use crate::kinematics::SCurve;

    fn env(floors: usize) -> CarEnv {
        BuildingConfig::new(floors, 3).env()
    }

    fn parked(floor: Floor) -> CarSnapshot {
        CarSnapshot::new(0, 0.0, CarState::parked(floor, 16))
    }

    #[test]
    fn idle_car_at_call_floor_waits_only_for_doors() {
        let env = env(8);
        let call = HallCall::new(1, 3, Direction::Up, 0.0);
        assert_eq!(unary_weight(&env, &parked(3), &call).unwrap(), env.doors.open_time);
    }

    #[test]
    fn worked_example_up_car_with_car_call() {
        // Car at floor 3 heading up with a car call to 5; pickup at 2.
        let env = env(8);
        let mut state = CarState::parked(3, 16);
        state.heading = Heading::Up;
        state.car_calls.insert(5);
        state.load = 1;
        let car = CarSnapshot::new(0, 0.0, state);
        let call = HallCall::new(1, 2, Direction::Up, 0.0);
        let t = &env.table;
        let expected = t.time(3, 5) + env.doors.total() + t.time(5, 2) + env.doors.open_time;
        assert!((unary_weight(&env, &car, &call).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn worked_example_pairwise_expectation() {
        // Same car, calls at 2 (up) and 7 (down). The car goes 3→5, then to
        // 7, drops the floor-7 passenger at f ∈ {0..6}, then returns to 2.
        let env = env(8);
        let mut state = CarState::parked(3, 16);
        state.heading = Heading::Up;
        state.car_calls.insert(5);
        let car = CarSnapshot::new(0, 0.0, state);
        let a = HallCall::new(1, 2, Direction::Up, 0.0);
        let b = HallCall::new(2, 7, Direction::Down, 0.0);
        let t = &env.table;
        let d = env.doors;
        let w_b = t.time(3, 5) + d.total() + t.time(5, 7) + d.open_time;
        let mut expected_a = 0.0;
        for f in 0..7 {
            let via = if f == 2 {
                // The drop at 2 and the pickup at 2 share one stop.
                t.time(7, 2) + d.open_time
            } else {
                t.time(7, f) + d.total() + t.time(f, 2) + d.open_time
            };
            expected_a += (w_b + d.dwell_time + d.close_time + via) / 7.0;
        }
        let w_a = unary_weight(&env, &car, &a).unwrap();
        let w_ab = pairwise_weight(&env, &car, &a, &b, &DestinationDistribution::Uniform).unwrap();
        let w_b_solo = unary_weight(&env, &car, &b).unwrap();
        assert!((w_b_solo - w_b).abs() < 1e-9);
        assert!((w_a + w_b_solo + w_ab - (w_b + expected_a)).abs() < 1e-9);
        assert!(w_ab >= 0.0);
    }

    #[test]
    fn pairwise_is_symmetric() {
        let env = env(10);
        let car = parked(4);
        let a = HallCall::new(1, 8, Direction::Down, 0.0);
        let b = HallCall::new(2, 1, Direction::Up, 1.0);
        let ab = pairwise_weight(&env, &car, &a, &b, &DestinationDistribution::Uniform).unwrap();
        let ba = pairwise_weight(&env, &car, &b, &a, &DestinationDistribution::Uniform).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn bonus_values() {
        assert_eq!(apply_coincident_bonus(100.0, true), 90.0);
        assert_eq!(apply_coincident_bonus(0.0, true), 0.0);
        assert_eq!(apply_coincident_bonus(40.0, true), 32.0);
        assert_eq!(apply_coincident_bonus(40.0, false), 40.0);
    }

    #[test]
    fn capacity_penalty_threshold_is_strict() {
        let config = WeightConfig::default();
        let mut car = parked(0);
        assert_eq!(capacity_penalty(&car, &config), 0.0);
        car.state.load = car.state.capacity - 2;
        assert_eq!(capacity_penalty(&car, &config), 0.0);
        car.state.load = car.state.capacity - 1;
        assert_eq!(capacity_penalty(&car, &config), PENALTY_LARGE);
    }

    #[test]
    fn higher_order_rejects_small_k() {
        assert!(higher_order_terms(&[(2, 1.0)]).is_err());
        assert!(higher_order_terms(&[(3, -1.0)]).is_err());
        assert_eq!(higher_order_terms(&[]).unwrap(), vec![]);
        let t = higher_order_terms(&[(3, 5.0)]).unwrap()[0];
        assert_eq!(t.total(3), 5.0);
        assert_eq!(t.total(4), 20.0);
        assert_eq!(t.marginal(3), 15.0);
    }

    #[test]
    fn single_call_single_car_weights() {
        let env = env(8);
        let cars = [parked(2)];
        let calls = [HallCall::new(1, 2, Direction::Down, 0.0)];
        let ws = build_weights(&env, &cars, &calls, &DestinationDistribution::Uniform, &WeightConfig::default()).unwrap();
        assert_eq!(ws.unary(0, 0), env.doors.open_time);
        assert_eq!(ws.penalty(0), env.doors.open_time);
        assert_eq!(ws.offset(), env.doors.open_time);
    }

    #[test]
    fn hand_made_penalties_follow_the_max_rule() {
        let ws = WeightSet::from_parts(
            vec![vec![10.0, 20.0], vec![15.0, 15.0]],
            vec![vec![vec![0.0, 8.0], vec![8.0, 0.0]], vec![vec![0.0, 0.0], vec![0.0, 0.0]]],
            vec![],
        )
        .unwrap();
        assert_eq!(ws.penalties(), &[20.0, 23.0]);
        assert_eq!(ws.offset(), 86.0);
    }

    #[test]
    fn duplicate_calls_are_rejected() {
        let env = env(8);
        let calls = [HallCall::new(1, 4, Direction::Up, 0.0), HallCall::new(2, 4, Direction::Up, 1.0)];
        let err = build_weights(&env, &[parked(0)], &calls, &DestinationDistribution::Uniform, &WeightConfig::default());
        assert!(matches!(err, Err(Error::DuplicateCall { floor: 4, .. })));
    }

    #[test]
    fn stops_outside_building_are_rejected() {
        let env = env(8);
        let stop = PlannedStop { floor: 9, direction: Direction::Down, press_time: 0.0, destination: None };
        assert!(service_plan(&env, &parked(0), &[stop]).is_err());
    }

    #[test]
    fn moving_car_plan_uses_remaining_trip_time() {
        let env = env(12);
        let profile = SCurve::new(env.position(10), &env.motion);
        let mut state = CarState::parked(0, 16);
        state.phase = Phase::Moving(Trip { from: 0, to: 10, start: 0.0, profile });
        state.heading = Heading::Up;
        state.car_calls.insert(10);
        let car = CarSnapshot::new(0, 4.0, state);
        let call = HallCall::new(1, 10, Direction::Up, 4.0);
        let w = unary_weight(&env, &car, &call).unwrap();
        assert!((w - (profile.duration() - 4.0 + env.doors.open_time)).abs() < 1e-9);
    }

    #[test]
    fn table_distribution_validation() {
        let mut rows = BTreeMap::new();
        rows.insert((3, Direction::Up), vec![(4, 0.5), (5, 0.4)]);
        assert!(DestinationDistribution::table(rows.clone()).is_err());
        rows.insert((3, Direction::Up), vec![(4, 0.5), (2, 0.5)]);
        assert!(DestinationDistribution::table(rows.clone()).is_err());
        rows.insert((3, Direction::Up), vec![(4, 0.5), (6, 0.5)]);
        let d = DestinationDistribution::table(rows).unwrap();
        assert_eq!(d.candidates(8, 3, Direction::Up).unwrap(), vec![(4, 0.5), (6, 0.5)]);
        assert!(d.candidates(8, 4, Direction::Up).is_err());
    }
}
