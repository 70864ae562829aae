//! Frozen-state planning checked against a stop-by-stop re-simulation of
//! collective control that only uses rest-to-rest travel times.

use std::collections::BTreeSet;

use liftsched_core::car::CarState;
use liftsched_core::waiting::{pairwise_weight, service_plan, PlannedStop};
use liftsched_core::{BuildingConfig, CarEnv, CarSnapshot, DestinationDistribution, Direction, Floor, HallCall, Heading};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
struct Stop {
    floor: Floor,
    dir: Direction,
    press: f64,
    dest: Floor,
    id: usize,
}

struct Frozen {
    at: Floor,
    heading: Option<Direction>,
    calls: BTreeSet<Floor>,
    waiting: Vec<Stop>,
}

fn sign(from: Floor, to: Floor) -> Option<Direction> {
    match to.cmp(&from) {
        std::cmp::Ordering::Greater => Some(Direction::Up),
        std::cmp::Ordering::Less => Some(Direction::Down),
        std::cmp::Ordering::Equal => None,
    }
}

impl Frozen {
    fn hall(&self, dir: Direction) -> BTreeSet<Floor> {
        self.waiting.iter().filter(|s| s.dir == dir).map(|s| s.floor).collect()
    }

    /// Next stop and the hall direction served there.
    fn choose(&self) -> Option<(Floor, Option<Direction>)> {
        let up = self.hall(Direction::Up);
        let down = self.hall(Direction::Down);
        let dir = match self.heading {
            Some(d) => d,
            None if !self.calls.is_empty() => {
                let above = self.calls.range(self.at..).next().map(|q| q - self.at);
                let below = self.calls.range(..=self.at).next_back().map(|q| self.at - q);
                match (above, below) {
                    (Some(a), Some(b)) if b < a => Direction::Down,
                    (None, Some(_)) => Direction::Down,
                    _ => Direction::Up,
                }
            }
            None => {
                let here = self.waiting.iter().filter(|s| s.floor == self.at).min_by(|a, b| a.press.total_cmp(&b.press).then(a.dir.cmp(&b.dir)));
                if let Some(s) = here {
                    return Some((self.at, Some(s.dir)));
                }
                let near = self.waiting.iter().min_by(|a, b| {
                    a.floor.abs_diff(self.at).cmp(&b.floor.abs_diff(self.at)).then(a.press.total_cmp(&b.press)).then(a.floor.cmp(&b.floor))
                })?;
                sign(self.at, near.floor)?
            }
        };
        let (with, against) = match dir {
            Direction::Up => (&up, &down),
            Direction::Down => (&down, &up),
        };
        let ahead = |q: Floor| match dir {
            Direction::Up => q >= self.at,
            Direction::Down => q <= self.at,
        };
        let nearest = |set: &mut dyn Iterator<Item = Floor>| set.min_by_key(|q| q.abs_diff(self.at));
        let farthest = |set: &mut dyn Iterator<Item = Floor>| set.max_by_key(|q| q.abs_diff(self.at));
        let mut same = self.calls.iter().chain(with.iter()).copied().filter(|&q| ahead(q));
        if let Some(q) = nearest(&mut same) {
            return Some((q, with.contains(&q).then_some(dir)));
        }
        let mut turn = against.iter().copied().filter(|&q| ahead(q));
        if let Some(q) = farthest(&mut turn) {
            return Some((q, Some(dir.opposite())));
        }
        if !self.calls.is_empty() {
            let mut back = self.calls.iter().chain(against.iter()).copied().filter(|&q| !ahead(q) || q == self.at);
            let q = nearest(&mut back)?;
            return Some((q, against.contains(&q).then_some(dir.opposite())));
        }
        if let Some(&q) = match dir {
            Direction::Up => against.iter().next_back(),
            Direction::Down => against.iter().next(),
        } {
            return Some((q, Some(dir.opposite())));
        }
        match dir {
            Direction::Up => with.iter().next(),
            Direction::Down => with.iter().next_back(),
        }
        .map(|&q| (q, Some(dir)))
    }
}

/// Doors-open instant of each stop, measured from time 0, for a car at
/// rest with closed doors.
fn reference(env: &CarEnv, mut car: Frozen, stops: &[Stop]) -> Vec<f64> {
    let mut times = vec![f64::NAN; stops.len()];
    let mut now = 0.0;
    let mut lantern;
    for _ in 0..1000 {
        let Some((q, serve)) = car.choose() else { break };
        if q == car.at {
            lantern = serve;
            if serve.is_some() {
                car.heading = serve;
            }
        } else {
            car.heading = sign(car.at, q);
            now += env.table.time(car.at, q);
            car.at = q;
            let dropped = car.calls.remove(&q);
            match car.choose() {
                Some((r, Some(d))) if r == q => {
                    lantern = Some(d);
                    car.heading = Some(d);
                }
                next if dropped => {
                    lantern = next.and_then(|(r, _)| sign(q, r));
                    car.heading = lantern;
                }
                _ => continue,
            }
        }
        now += env.doors.open_time;
        if let Some(d) = lantern {
            let at = car.at;
            car.waiting.retain(|s| {
                if s.floor == at && s.dir == d {
                    times[s.id] = now;
                    car.calls.insert(s.dest);
                    false
                } else {
                    true
                }
            });
        }
        now += env.doors.dwell_time + env.doors.close_time;
    }
    times
}

fn random_case(rng: &mut impl Rng, env: &CarEnv) -> (CarState, Frozen, Vec<Stop>) {
    let floors = env.floors;
    let at = rng.random_range(0..floors);
    let heading = match rng.random_range(0..3) {
        0 => None,
        1 => Some(Direction::Up),
        _ => Some(Direction::Down),
    };
    let calls: BTreeSet<Floor> = (0..floors).filter(|&f| f != at && rng.random_bool(0.25)).collect();
    let mut slots: Vec<(Floor, Direction)> = (0..floors)
        .flat_map(|f| [(f, Direction::Up), (f, Direction::Down)])
        .filter(|&(f, d)| !(f == 0 && d == Direction::Down) && !(f == floors - 1 && d == Direction::Up))
        .collect();
    let n = rng.random_range(1..=3);
    let mut stops = Vec::new();
    for id in 0..n {
        let (floor, dir) = slots.swap_remove(rng.random_range(0..slots.len()));
        let dest = match dir {
            Direction::Up => rng.random_range(floor + 1..floors),
            Direction::Down => rng.random_range(0..floor),
        };
        stops.push(Stop { floor, dir, press: rng.random_range(0.0..10.0), dest, id });
    }
    let mut state = CarState::parked(at, 16);
    state.heading = heading.map(Heading::from).unwrap_or(Heading::Idle);
    state.car_calls = calls.iter().copied().collect();
    state.load = calls.len() as u32;
    let frozen = Frozen { at, heading, calls, waiting: stops.clone() };
    (state, frozen, stops)
}

fn as_planned(stops: &[Stop]) -> Vec<PlannedStop> {
    stops.iter().map(|s| PlannedStop { floor: s.floor, direction: s.dir, press_time: s.press, destination: Some(s.dest) }).collect()
}

#[test]
fn service_plan_matches_stop_by_stop_reference() {
    let env = BuildingConfig::new(6, 1).env();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..500 {
        let (state, frozen, stops) = random_case(&mut rng, &env);
        let expected = reference(&env, frozen, &stops);
        let got = service_plan(&env, &CarSnapshot::new(0, 0.0, state.clone()), &as_planned(&stops)).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-9, "case {case}: {state:?} {stops:?}: planned {got:?}, reference {expected:?}");
        }
    }
}

#[test]
fn pairwise_expectation_matches_destination_enumeration() {
    let env = BuildingConfig::new(3, 1).env();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (state, _, stops) = random_case(&mut rng, &env);
        if stops.len() < 2 {
            continue;
        }
        let calls: Vec<HallCall> = stops[..2].iter().map(|s| HallCall::new(s.id as u64, s.floor, s.dir, s.press)).collect();
        let snap = CarSnapshot::new(0, 0.0, state.clone());
        let got = pairwise_weight(&env, &snap, &calls[0], &calls[1], &DestinationDistribution::Uniform).unwrap();

        let dests = |s: &Stop| -> Vec<Floor> {
            match s.dir {
                Direction::Up => (s.floor + 1..env.floors).collect(),
                Direction::Down => (0..s.floor).collect(),
            }
        };
        let single = |s: Stop| {
            let frozen = Frozen { at: state.floor(), heading: state.heading.direction(), calls: state.car_calls.iter().collect(), waiting: vec![Stop { id: 0, ..s }] };
            reference(&env, frozen, &[Stop { id: 0, ..s }])[0]
        };
        let (di, dj) = (dests(&stops[0]), dests(&stops[1]));
        let mut joint = 0.0;
        for &a in &di {
            for &b in &dj {
                let pair = [Stop { dest: a, id: 0, ..stops[0] }, Stop { dest: b, id: 1, ..stops[1] }];
                let frozen = Frozen { at: state.floor(), heading: state.heading.direction(), calls: state.car_calls.iter().collect(), waiting: pair.to_vec() };
                let t = reference(&env, frozen, &pair);
                joint += (t[0] + t[1]) / (di.len() * dj.len()) as f64;
            }
        }
        let expected = joint - single(stops[0]) - single(stops[1]);
        assert!((got - expected).abs() < 1e-9, "{state:?} {stops:?}: {got} vs {expected}");
    }
}
