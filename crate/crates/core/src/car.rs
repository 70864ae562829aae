//! Single-car control under collective service order.
//!
//! [`CarState`] is the one state machine used both by the simulator and by
//! the frozen-state planner that produces waiting-time estimates, so that the
//! estimates and the simulated world agree on how a car moves.
//!
//! Stop selection follows collective order: the car serves car calls and
//! same-direction hall calls ahead of it, nearest first. With none left it
//! travels on to the farthest opposite-direction call ahead and turns there.
//! Only then does it reverse, toward its remaining car calls or, when empty,
//! the highest (lowest) opposite-direction call, otherwise the lowest
//! (highest) same-direction call behind it.

use crate::building::{CarEnv, Direction, Floor, FloorSet, Heading};
use crate::kinematics::{CarKinematicState, DoorState, SCurve};

/// A hall call a car is committed to serve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pickup {
    pub call: u64,
    pub floor: Floor,
    pub direction: Direction,
    pub press_time: f64,
    /// Destination revealed on boarding. Only the planner sets this; in the
    /// simulator destinations come from the boarding passengers.
    pub destination: Option<Floor>,
}

/// A rest-to-rest movement between two floors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub from: Floor,
    pub to: Floor,
    pub start: f64,
    pub profile: SCurve,
}

impl Trip {
    pub fn direction(&self) -> Direction {
        if self.to > self.from {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.profile.duration()
    }

    /// Whether the car can still come to rest at `floor` instead of `to`.
    pub fn can_stop_at(&self, env: &CarEnv, floor: Floor, now: f64) -> bool {
        if floor >= env.floors || Direction::between(self.from, floor) != Some(self.direction()) {
            return false;
        }
        if floor == self.to {
            return now <= self.end() + 1e-9;
        }
        let other = env.table.profile(floor.abs_diff(self.from));
        self.profile.divergence(other) >= now - self.start - 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoorStage {
    Opening,
    Open,
    Closing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// At rest with doors closed.
    Parked { floor: Floor },
    Moving(Trip),
    Doors { floor: Floor, stage: DoorStage, since: f64 },
}

/// Where a car goes next and which hall direction it serves there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub floor: Floor,
    pub serve: Option<Direction>,
}

/// Motion decision for a car, see [`CarState::next_action`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Keep the committed direction and travel on to this floor.
    Continue(Floor),
    /// Stop at this floor, the current one or the nearest reachable one.
    StopAt(Floor),
    /// Turn around and travel to this floor.
    Reverse(Floor),
    Park,
}

/// Observable state changes, in the order they happened.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Departed { from: Floor, to: Floor },
    Retargeted { to: Floor },
    Arrived { floor: Floor },
    /// Doors are fully open (or a call was picked up while they were open).
    /// `served` holds the pickups removed from the car at this instant.
    Service { floor: Floor, lantern: Option<Direction>, served: Vec<Pickup> },
    DoorsClosing { floor: Floor },
    DoorsClosed { floor: Floor },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarState {
    pub phase: Phase,
    pub heading: Heading,
    /// Hall direction announced at the current stop.
    pub lantern: Option<Direction>,
    pub car_calls: FloorSet,
    pub pickups: Vec<Pickup>,
    pub load: u32,
    pub capacity: u32,
}

fn pickup_sets(pickups: &[Pickup]) -> (FloorSet, FloorSet) {
    let mut up = FloorSet::EMPTY;
    let mut down = FloorSet::EMPTY;
    for p in pickups {
        match p.direction {
            Direction::Up => up.insert(p.floor),
            Direction::Down => down.insert(p.floor),
        }
    }
    (up, down)
}

/// Earliest-pressed pickup among those matching `pred`; ties go to up calls.
fn earliest<'a>(pickups: &'a [Pickup], pred: impl Fn(&Pickup) -> bool) -> Option<&'a Pickup> {
    pickups.iter().filter(|p| pred(p)).min_by(|a, b| {
        a.press_time
            .total_cmp(&b.press_time)
            .then_with(|| a.direction.cmp(&b.direction))
            .then_with(|| a.floor.cmp(&b.floor))
    })
}

fn directed(at: Floor, dir: Direction, car_calls: FloorSet, up: FloorSet, down: FloorSet) -> Option<Target> {
    match dir {
        Direction::Up => {
            if let Some(q) = (car_calls.at_or_above(at).union(up.at_or_above(at))).min() {
                return Some(Target { floor: q, serve: up.contains(q).then_some(Direction::Up) });
            }
            if let Some(q) = down.at_or_above(at).max() {
                return Some(Target { floor: q, serve: Some(Direction::Down) });
            }
            if !car_calls.is_empty() {
                let q = car_calls.at_or_below(at).union(down.at_or_below(at)).max()?;
                return Some(Target { floor: q, serve: down.contains(q).then_some(Direction::Down) });
            }
            if let Some(q) = down.max() {
                return Some(Target { floor: q, serve: Some(Direction::Down) });
            }
            up.min().map(|q| Target { floor: q, serve: Some(Direction::Up) })
        }
        Direction::Down => {
            if let Some(q) = (car_calls.at_or_below(at).union(down.at_or_below(at))).max() {
                return Some(Target { floor: q, serve: down.contains(q).then_some(Direction::Down) });
            }
            if let Some(q) = up.at_or_below(at).min() {
                return Some(Target { floor: q, serve: Some(Direction::Up) });
            }
            if !car_calls.is_empty() {
                let q = car_calls.at_or_above(at).union(up.at_or_above(at)).min()?;
                return Some(Target { floor: q, serve: up.contains(q).then_some(Direction::Up) });
            }
            if let Some(q) = up.min() {
                return Some(Target { floor: q, serve: Some(Direction::Up) });
            }
            down.max().map(|q| Target { floor: q, serve: Some(Direction::Down) })
        }
    }
}

/// Next stop for a car at (or, when moving, able to stop no earlier than)
/// floor `at`.
///
/// Calls at `at` count as ahead. An idle car heads for the nearest call,
/// preferring the earlier-pressed one when two are equally near.
pub fn next_stop(at: Floor, heading: Heading, car_calls: FloorSet, pickups: &[Pickup]) -> Option<Target> {
    let (up, down) = pickup_sets(pickups);
    match heading.direction() {
        Some(dir) => directed(at, dir, car_calls, up, down),
        None => {
            if !car_calls.is_empty() {
                let above = car_calls.at_or_above(at).min().map(|q| q - at);
                let below = car_calls.at_or_below(at).max().map(|q| at - q);
                let dir = match (above, below) {
                    (Some(a), Some(b)) if b < a => Direction::Down,
                    (None, Some(_)) => Direction::Down,
                    _ => Direction::Up,
                };
                return directed(at, dir, car_calls, up, down);
            }
            if let Some(p) = earliest(pickups, |p| p.floor == at) {
                return Some(Target { floor: at, serve: Some(p.direction) });
            }
            let nearest = pickups.iter().min_by(|a, b| {
                a.floor
                    .abs_diff(at)
                    .cmp(&b.floor.abs_diff(at))
                    .then_with(|| a.press_time.total_cmp(&b.press_time))
                    .then_with(|| a.floor.cmp(&b.floor))
            })?;
            let dir = Direction::between(at, nearest.floor)?;
            directed(at, dir, car_calls, up, down)
        }
    }
}

fn ahead_of(at: Floor, floor: Floor, dir: Direction) -> bool {
    match dir {
        Direction::Up => floor >= at,
        Direction::Down => floor <= at,
    }
}

impl CarState {
    pub fn parked(floor: Floor, capacity: u32) -> Self {
        CarState {
            phase: Phase::Parked { floor },
            heading: Heading::Idle,
            lantern: None,
            car_calls: FloorSet::EMPTY,
            pickups: Vec::new(),
            load: 0,
            capacity,
        }
    }

    /// The floor the car is at, or the floor it last departed from.
    pub fn floor(&self) -> Floor {
        match self.phase {
            Phase::Parked { floor } | Phase::Doors { floor, .. } => floor,
            Phase::Moving(trip) => trip.from,
        }
    }

    /// Pickups the car will answer: none while it is full and still has
    /// passengers to drop.
    pub fn eligible(&self) -> &[Pickup] {
        if self.load >= self.capacity && !self.car_calls.is_empty() {
            &[]
        } else {
            &self.pickups
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self.phase, Phase::Moving(_))
    }

    pub fn next_event_time(&self, env: &CarEnv) -> Option<f64> {
        match self.phase {
            Phase::Parked { .. } => None,
            Phase::Moving(trip) => Some(trip.end()),
            Phase::Doors { stage, since, .. } => Some(
                since
                    + match stage {
                        DoorStage::Opening => env.doors.open_time,
                        DoorStage::Open => env.doors.dwell_time,
                        DoorStage::Closing => env.doors.close_time,
                    },
            ),
        }
    }

    /// Nearest floor at which a moving car can still come to rest.
    pub fn anchor(&self, env: &CarEnv, now: f64) -> Floor {
        match self.phase {
            Phase::Moving(trip) => {
                let dir = trip.direction();
                let mut q = trip.from;
                loop {
                    q = match dir {
                        Direction::Up => q + 1,
                        Direction::Down => q - 1,
                    };
                    if q == trip.to || trip.can_stop_at(env, q, now) {
                        return q;
                    }
                }
            }
            _ => self.floor(),
        }
    }

    /// Position, velocity and door state at `now`.
    pub fn kinematic(&self, env: &CarEnv, now: f64) -> CarKinematicState {
        match self.phase {
            Phase::Parked { floor } => CarKinematicState::at_rest(env.position(floor)),
            Phase::Moving(trip) => {
                let (p, v, _) = trip.profile.state_at(now - trip.start);
                let sign = match trip.direction() {
                    Direction::Up => 1.0,
                    Direction::Down => -1.0,
                };
                CarKinematicState {
                    position: env.position(trip.from) + sign * p,
                    velocity: sign * v,
                    door_state: DoorState::Closed,
                }
            }
            Phase::Doors { floor, stage, since } => {
                let e = (now - since).max(0.0);
                CarKinematicState {
                    position: env.position(floor),
                    velocity: 0.0,
                    door_state: match stage {
                        DoorStage::Opening => DoorState::Opening(e),
                        DoorStage::Open => DoorState::Open(e),
                        DoorStage::Closing => DoorState::Closing(e),
                    },
                }
            }
        }
    }

    /// What the car would do next given its current commitments.
    pub fn next_action(&self, env: &CarEnv, now: f64) -> Action {
        match self.phase {
            Phase::Moving(trip) => {
                let dir = trip.direction();
                let anchor = self.anchor(env, now);
                match next_stop(anchor, dir.into(), self.car_calls, self.eligible()) {
                    Some(t) if ahead_of(anchor, t.floor, dir) => {
                        if t.floor == trip.to {
                            Action::Continue(t.floor)
                        } else if t.floor == anchor || ahead_of(t.floor, trip.to, dir) {
                            Action::StopAt(t.floor)
                        } else {
                            Action::Continue(t.floor)
                        }
                    }
                    Some(t) => Action::Reverse(t.floor),
                    None => Action::StopAt(anchor),
                }
            }
            _ => {
                let at = self.floor();
                match next_stop(at, self.heading, self.car_calls, self.eligible()) {
                    None => Action::Park,
                    Some(t) if t.floor == at => Action::StopAt(at),
                    Some(t) => match self.heading.direction() {
                        Some(d) if Direction::between(at, t.floor) != Some(d) => Action::Reverse(t.floor),
                        _ => Action::Continue(t.floor),
                    },
                }
            }
        }
    }

    /// Handles the internal event due at `now` (see [`Self::next_event_time`]).
    pub fn step(&mut self, env: &CarEnv, now: f64, out: &mut Vec<Transition>) {
        match self.phase {
            Phase::Parked { .. } => {}
            Phase::Moving(trip) => {
                out.push(Transition::Arrived { floor: trip.to });
                self.arrive(env, trip.to, now, out);
            }
            Phase::Doors { floor, stage: DoorStage::Opening, .. } => {
                self.phase = Phase::Doors { floor, stage: DoorStage::Open, since: now };
                let served = self.serve(floor);
                out.push(Transition::Service { floor, lantern: self.lantern, served });
            }
            Phase::Doors { floor, stage: DoorStage::Open, .. } => {
                self.phase = Phase::Doors { floor, stage: DoorStage::Closing, since: now };
                out.push(Transition::DoorsClosing { floor });
            }
            Phase::Doors { floor, stage: DoorStage::Closing, .. } => {
                self.phase = Phase::Parked { floor };
                out.push(Transition::DoorsClosed { floor });
                self.decide(env, now, out);
            }
        }
    }

    /// Re-plans after commitments changed (new or withdrawn pickups, new car
    /// calls).
    pub fn refresh(&mut self, env: &CarEnv, now: f64, out: &mut Vec<Transition>) {
        match self.phase {
            Phase::Parked { .. } => self.decide(env, now, out),
            Phase::Moving(mut trip) => {
                let dir = trip.direction();
                let anchor = self.anchor(env, now);
                let desired = match next_stop(anchor, dir.into(), self.car_calls, self.eligible()) {
                    Some(t) if ahead_of(anchor, t.floor, dir) => t.floor,
                    _ => anchor,
                };
                if desired != trip.to && trip.can_stop_at(env, desired, now) {
                    trip.to = desired;
                    trip.profile = *env.table.profile(desired.abs_diff(trip.from));
                    self.phase = Phase::Moving(trip);
                    out.push(Transition::Retargeted { to: desired });
                }
            }
            Phase::Doors { floor, stage, .. } => {
                if self.heading == Heading::Idle {
                    let next = next_stop(floor, Heading::Idle, self.car_calls, self.eligible());
                    if let Some(d) = next.and_then(|t| Direction::between(floor, t.floor).or(t.serve)) {
                        self.heading = d.into();
                    }
                }
                if stage == DoorStage::Closing {
                    return;
                }
                if self.lantern.is_none() {
                    if let Some(Target { floor: q, serve: Some(d) }) = next_stop(floor, self.heading, self.car_calls, self.eligible()) {
                        if q == floor {
                            self.lantern = Some(d);
                            self.heading = d.into();
                        }
                    }
                }
                if stage == DoorStage::Open {
                    let served = self.serve(floor);
                    if !served.is_empty() {
                        out.push(Transition::Service { floor, lantern: self.lantern, served });
                    }
                }
            }
        }
    }

    /// Removes and returns pickups answered by the open doors at `floor`.
    fn serve(&mut self, floor: Floor) -> Vec<Pickup> {
        let Some(lantern) = self.lantern else {
            return Vec::new();
        };
        let mut served = Vec::new();
        self.pickups.retain(|p| {
            if p.floor == floor && p.direction == lantern {
                served.push(*p);
                false
            } else {
                true
            }
        });
        for p in &served {
            if let Some(dest) = p.destination {
                self.car_calls.insert(dest);
            }
        }
        served
    }

    fn open_doors(&mut self, floor: Floor, now: f64) {
        self.phase = Phase::Doors { floor, stage: DoorStage::Opening, since: now };
    }

    fn arrive(&mut self, env: &CarEnv, floor: Floor, now: f64, out: &mut Vec<Transition>) {
        let dropped = self.car_calls.remove(floor);
        self.phase = Phase::Parked { floor };
        match next_stop(floor, self.heading, self.car_calls, self.eligible()) {
            Some(Target { floor: q, serve: Some(d) }) if q == floor => {
                self.lantern = Some(d);
                self.heading = d.into();
                self.open_doors(floor, now);
            }
            next if dropped => {
                self.lantern = next.and_then(|t| Direction::between(floor, t.floor));
                self.heading = self.lantern.map(Heading::from).unwrap_or(Heading::Idle);
                self.open_doors(floor, now);
            }
            _ => self.decide(env, now, out),
        }
    }

    fn decide(&mut self, env: &CarEnv, now: f64, out: &mut Vec<Transition>) {
        let Phase::Parked { floor } = self.phase else {
            return;
        };
        match next_stop(floor, self.heading, self.car_calls, self.eligible()) {
            None => {
                self.heading = Heading::Idle;
                self.lantern = None;
            }
            Some(t) if t.floor == floor => {
                self.lantern = t.serve;
                if let Some(d) = t.serve {
                    self.heading = d.into();
                }
                self.open_doors(floor, now);
            }
            Some(t) => {
                let dir = Direction::between(floor, t.floor).expect("distinct floors");
                self.heading = dir.into();
                self.lantern = None;
                self.phase = Phase::Moving(Trip {
                    from: floor,
                    to: t.floor,
                    start: now,
                    profile: *env.table.profile(floor.abs_diff(t.floor)),
                });
                out.push(Transition::Departed { from: floor, to: t.floor });
            }
        }
    }
}
