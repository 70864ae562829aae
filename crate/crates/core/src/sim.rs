//! Discrete-event simulation of a car group serving a passenger stream.
//!
//! Events are ordered by time, then kind (passenger arrivals, car events,
//! scheduler epochs), then insertion order. The scheduler runs every
//! `epoch_interval` seconds and whenever a new hall call is registered. Each
//! run reassigns every unlocked hall call; a call locks once its car is
//! about to stop for it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::building::{BuildingConfig, CarEnv, Direction, Floor};
use crate::car::{CarState, DoorStage, Phase, Pickup, Transition};
use crate::error::{domain, Error, Result};
use crate::traffic::{validate_arrivals, Arrival};
use crate::waiting::{CarSnapshot, HallCall};

/// A passenger and the instants that bound their waiting and riding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: u64,
    pub arrival_time: f64,
    pub origin: Floor,
    pub destination: Floor,
    pub board_time: Option<f64>,
    pub alight_time: Option<f64>,
    pub car: Option<usize>,
}

impl Passenger {
    fn new(a: &Arrival) -> Self {
        Passenger {
            id: a.id,
            arrival_time: a.arrival_time,
            origin: a.origin,
            destination: a.destination,
            board_time: None,
            alight_time: None,
            car: None,
        }
    }

    pub fn direction(&self) -> Direction {
        Direction::between(self.origin, self.destination).expect("origin differs from destination")
    }

    /// Seconds from the button press until the doors were fully open, or
    /// `None` while still waiting.
    pub fn wait(&self) -> Option<f64> {
        self.board_time.map(|b| b - self.arrival_time)
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Mean waiting time over boarded passengers; 0 when `empty`.
    pub awt: f64,
    pub awt_std: f64,
    pub waits: Vec<f64>,
    /// Mean press-to-alight time over delivered passengers.
    pub att: f64,
    pub served: usize,
    pub unserved_at_end: usize,
    /// True when no passenger boarded.
    pub empty: bool,
}

impl RunStats {
    fn from_passengers(passengers: &[Passenger]) -> Self {
        let waits: Vec<f64> = passengers.iter().filter_map(Passenger::wait).collect();
        let trips: Vec<f64> = passengers.iter().filter_map(|p| p.alight_time.map(|t| t - p.arrival_time)).collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let awt = mean(&waits);
        let awt_std = if waits.len() < 2 {
            0.0
        } else {
            (waits.iter().map(|w| (w - awt).powi(2)).sum::<f64>() / (waits.len() - 1) as f64).sqrt()
        };
        RunStats {
            awt,
            awt_std,
            att: mean(&trips),
            served: waits.len(),
            unserved_at_end: passengers.len() - waits.len(),
            empty: waits.is_empty(),
            waits,
        }
    }
}

/// Starting condition of a car: parked at `floor` carrying passengers bound
/// for `onboard`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialCar {
    pub floor: Floor,
    pub onboard: Vec<Floor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Arrivals at or after the horizon are rejected.
    pub horizon: f64,
    pub epoch_interval: f64,
    /// Seconds before a committed stop at which its hall call locks.
    pub lock_threshold: f64,
    /// Longest time allowed after the horizon to finish service.
    pub drain_limit: f64,
    pub trace: bool,
    /// One entry per car; empty means every car parks at the lobby.
    pub initial_cars: Vec<InitialCar>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { horizon: 3600.0, epoch_interval: 1.0, lock_threshold: 3.0, drain_limit: 3600.0, trace: false, initial_cars: Vec::new() }
    }
}

/// What a scheduler sees at an epoch: cars carrying only their locked
/// pickups, and every unlocked hall call.
#[derive(Debug, Clone)]
pub struct EpochView<'a> {
    pub now: f64,
    pub env: &'a CarEnv,
    pub cars: Vec<CarSnapshot>,
    pub calls: Vec<HallCall>,
}

/// Assigns hall calls to cars. Returns one entry per `view.calls`.
pub trait Scheduler {
    fn name(&self) -> String;
    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>>;
}

impl<S: Scheduler + ?Sized> Scheduler for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        (**self).assign(view)
    }
}

/// One line of the event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub car: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<Floor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passenger: Option<u64>,
}

pub const TRACE_SCHEMA: &str = "liftsched.trace";
pub const TRACE_VERSION: u32 = 1;

/// Writes a schema header line and one JSON object per record.
pub fn write_trace<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    let ser = |e: serde_json::Error| Error::Parse(e.to_string());
    let header = serde_json::json!({ "schema": TRACE_SCHEMA, "version": TRACE_VERSION });
    writeln!(w, "{header}")?;
    for r in trace {
        writeln!(w, "{}", serde_json::to_string(r).map_err(ser)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: RunStats,
    pub passengers: Vec<Passenger>,
    pub trace: Vec<TraceRecord>,
    /// Number of times a call moved from one car to another.
    pub reassignments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival(usize),
    Car { car: usize, token: u64 },
    Epoch { periodic: bool },
}

impl EventKind {
    fn priority(self) -> u8 {
        match self {
            EventKind::Arrival(_) => 0,
            EventKind::Car { .. } => 1,
            EventKind::Epoch { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.priority().cmp(&self.kind.priority()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct CallRecord {
    id: u64,
    press_time: f64,
    assigned: Option<usize>,
    locked: bool,
    waiting: Vec<usize>,
}

struct Car {
    state: CarState,
    token: u64,
    onboard: Vec<usize>,
}

struct World<'a, S: Scheduler> {
    env: CarEnv,
    opts: &'a SimOptions,
    scheduler: &'a mut S,
    cars: Vec<Car>,
    passengers: Vec<Passenger>,
    calls: BTreeMap<(Floor, Direction), CallRecord>,
    queue: BinaryHeap<Event>,
    seq: u64,
    next_call_id: u64,
    triggered_epoch: Option<f64>,
    trace: Vec<TraceRecord>,
    reassignments: usize,
    buf: Vec<Transition>,
}

/// Runs `traffic` through the building under `scheduler`.
///
/// The run is deterministic: the same inputs always give bit-identical
/// output.
pub fn run<S: Scheduler>(building: &BuildingConfig, traffic: &[Arrival], scheduler: &mut S, opts: &SimOptions) -> Result<RunOutput> {
    building.validate()?;
    validate_arrivals(traffic, building.floors)?;
    if traffic.last().is_some_and(|a| a.arrival_time >= opts.horizon) {
        return domain("passenger arrives after the horizon");
    }
    if !(opts.epoch_interval > 0.0 && opts.lock_threshold >= 0.0 && opts.drain_limit >= 0.0) {
        return domain("invalid simulation options");
    }
    if !opts.initial_cars.is_empty() && opts.initial_cars.len() != building.cars {
        return domain("initial car list must have one entry per car");
    }
    let env = building.env();
    let mut passengers: Vec<Passenger> = traffic.iter().map(Passenger::new).collect();
    let mut cars = Vec::with_capacity(building.cars);
    for k in 0..building.cars {
        let init = opts.initial_cars.get(k).cloned().unwrap_or_default();
        if init.floor >= building.floors || init.onboard.len() > building.car_capacity as usize {
            return domain(format!("invalid initial state for car {k}"));
        }
        let mut state = CarState::parked(init.floor, building.car_capacity);
        let mut onboard = Vec::new();
        for &dest in &init.onboard {
            if dest >= building.floors || dest == init.floor {
                return domain(format!("invalid onboard destination {dest} for car {k}"));
            }
            state.car_calls.insert(dest);
            state.load += 1;
            passengers.push(Passenger {
                id: u64::MAX - passengers.len() as u64,
                arrival_time: 0.0,
                origin: init.floor,
                destination: dest,
                board_time: Some(0.0),
                alight_time: None,
                car: Some(k),
            });
            onboard.push(passengers.len() - 1);
        }
        cars.push(Car { state, token: 0, onboard });
    }
    let mut world = World {
        env,
        opts,
        scheduler,
        cars,
        passengers,
        calls: BTreeMap::new(),
        queue: BinaryHeap::new(),
        seq: 0,
        next_call_id: 0,
        triggered_epoch: None,
        trace: Vec::new(),
        reassignments: 0,
        buf: Vec::new(),
    };
    for i in 0..traffic.len() {
        world.push(traffic[i].arrival_time, EventKind::Arrival(i));
    }
    world.push(0.0, EventKind::Epoch { periodic: true });
    world.run_loop()?;

    let generated = traffic.len();
    let passengers: Vec<Passenger> = world.passengers.into_iter().take(generated).collect();
    Ok(RunOutput { stats: RunStats::from_passengers(&passengers), passengers, trace: world.trace, reassignments: world.reassignments })
}

impl<S: Scheduler> World<'_, S> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { time, seq: self.seq, kind });
    }

    fn log(&mut self, time: f64, kind: &str, car: Option<usize>, floor: Option<Floor>, call: Option<u64>, passenger: Option<u64>) {
        if self.opts.trace {
            self.trace.push(TraceRecord { time, kind: kind.to_string(), car, floor, call, passenger });
        }
    }

    fn busy(&self) -> bool {
        !self.calls.is_empty() || self.cars.iter().any(|c| !c.onboard.is_empty())
    }

    fn run_loop(&mut self) -> Result<()> {
        let end = self.opts.horizon + self.opts.drain_limit;
        while let Some(ev) = self.queue.pop() {
            if ev.time > end {
                break;
            }
            let now = ev.time;
            match ev.kind {
                EventKind::Arrival(i) => self.on_arrival(now, i),
                EventKind::Car { car, token } => {
                    if token == self.cars[car].token {
                        let mut buf = std::mem::take(&mut self.buf);
                        self.cars[car].state.step(&self.env, now, &mut buf);
                        self.apply_transitions(car, now, &mut buf);
                        self.buf = buf;
                        self.reschedule(car);
                    }
                }
                EventKind::Epoch { periodic } => {
                    if !periodic {
                        self.triggered_epoch = None;
                    }
                    self.epoch(now)?;
                    if periodic {
                        let next = now + self.opts.epoch_interval;
                        if next < self.opts.horizon || self.busy() {
                            self.push(next, EventKind::Epoch { periodic: true });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn reschedule(&mut self, car: usize) {
        let c = &mut self.cars[car];
        c.token += 1;
        let token = c.token;
        if let Some(t) = c.state.next_event_time(&self.env) {
            self.push(t, EventKind::Car { car, token });
        }
    }

    fn trigger_epoch(&mut self, now: f64) {
        if self.triggered_epoch != Some(now) {
            self.triggered_epoch = Some(now);
            self.push(now, EventKind::Epoch { periodic: false });
        }
    }

    fn on_arrival(&mut self, now: f64, pid: usize) {
        let (origin, dir, id) = {
            let p = &self.passengers[pid];
            (p.origin, p.direction(), p.id)
        };
        self.log(now, "passenger_arrival", None, Some(origin), None, Some(id));
        let open_car = self.cars.iter().position(|c| {
            matches!(c.state.phase, Phase::Doors { floor, stage: DoorStage::Open, .. } if floor == origin)
                && c.state.lantern == Some(dir)
                && c.state.load < c.state.capacity
        });
        if let Some(car) = open_car {
            self.board(car, pid, now);
            return;
        }
        if let Some(call) = self.calls.get_mut(&(origin, dir)) {
            call.waiting.push(pid);
            return;
        }
        let id = self.next_call_id;
        self.next_call_id += 1;
        self.calls.insert((origin, dir), CallRecord { id, press_time: now, assigned: None, locked: false, waiting: vec![pid] });
        self.log(now, "hall_call", None, Some(origin), Some(id), None);
        self.trigger_epoch(now);
    }

    fn board(&mut self, car: usize, pid: usize, now: f64) {
        let p = &mut self.passengers[pid];
        p.board_time = Some(now);
        p.car = Some(car);
        let (dest, id, origin) = (p.destination, p.id, p.origin);
        let c = &mut self.cars[car];
        c.state.load += 1;
        c.state.car_calls.insert(dest);
        c.onboard.push(pid);
        self.log(now, "board", Some(car), Some(origin), None, Some(id));
    }

    fn apply_transitions(&mut self, car: usize, now: f64, buf: &mut Vec<Transition>) {
        let mut released = Vec::new();
        for t in buf.drain(..) {
            match t {
                Transition::Departed { from, .. } => self.log(now, "depart", Some(car), Some(from), None, None),
                Transition::Retargeted { to } => self.log(now, "retarget", Some(car), Some(to), None, None),
                Transition::Arrived { floor } => self.log(now, "car_arrives_at_floor", Some(car), Some(floor), None, None),
                Transition::DoorsClosing { floor } => self.log(now, "doors_closing", Some(car), Some(floor), None, None),
                Transition::DoorsClosed { floor } => self.log(now, "doors_closed", Some(car), Some(floor), None, None),
                Transition::Service { floor, lantern, served } => {
                    self.log(now, "doors_open", Some(car), Some(floor), None, None);
                    self.alight(car, floor, now);
                    for p in &served {
                        if let Some(rec) = self.calls.get_mut(&(p.floor, p.direction)) {
                            if rec.id == p.call {
                                rec.assigned = None;
                                rec.locked = false;
                            }
                        }
                    }
                    if let Some(dir) = lantern {
                        released.extend(self.board_waiting(car, floor, dir, now));
                    }
                }
            }
        }
        for other in released {
            let mut b = Vec::new();
            self.cars[other].state.refresh(&self.env, now, &mut b);
            self.apply_transitions(other, now, &mut b);
            self.reschedule(other);
        }
    }

    fn alight(&mut self, car: usize, floor: Floor, now: f64) {
        let onboard = std::mem::take(&mut self.cars[car].onboard);
        let mut keep = Vec::with_capacity(onboard.len());
        for pid in onboard {
            if self.passengers[pid].destination == floor {
                self.passengers[pid].alight_time = Some(now);
                self.cars[car].state.load -= 1;
                let id = self.passengers[pid].id;
                self.log(now, "alight", Some(car), Some(floor), None, Some(id));
            } else {
                keep.push(pid);
            }
        }
        self.cars[car].onboard = keep;
    }

    /// Boards waiting passengers; returns other cars that lost a pickup.
    fn board_waiting(&mut self, car: usize, floor: Floor, dir: Direction, now: f64) -> Vec<usize> {
        let Some(mut rec) = self.calls.remove(&(floor, dir)) else {
            return Vec::new();
        };
        let room = (self.cars[car].state.capacity - self.cars[car].state.load) as usize;
        let boarding: Vec<usize> = rec.waiting.drain(..room.min(rec.waiting.len())).collect();
        let boarded = !boarding.is_empty();
        for pid in boarding {
            self.board(car, pid, now);
        }
        if rec.waiting.is_empty() {
            self.log(now, "call_cleared", Some(car), Some(floor), Some(rec.id), None);
            if let Some(holder) = rec.assigned {
                self.cars[holder].state.pickups.retain(|p| p.call != rec.id);
                if holder != car {
                    return vec![holder];
                }
            }
            return Vec::new();
        }
        // Left behind for lack of room: the call stays and is reassigned.
        if rec.assigned == Some(car) {
            rec.assigned = None;
            rec.locked = false;
        }
        self.calls.insert((floor, dir), rec);
        if boarded {
            self.trigger_epoch(now);
        }
        Vec::new()
    }

    fn update_locks(&mut self, now: f64) {
        let threshold = self.opts.lock_threshold;
        for (&(floor, dir), rec) in self.calls.iter_mut() {
            let Some(car) = rec.assigned else { continue };
            if rec.locked {
                continue;
            }
            let state = &self.cars[car].state;
            let close = match state.phase {
                Phase::Moving(trip) => trip.to == floor && trip.end() - now <= threshold,
                Phase::Doors { floor: f, stage: DoorStage::Opening, .. } => f == floor && state.lantern == Some(dir),
                _ => false,
            };
            if close {
                rec.locked = true;
            }
        }
    }

    fn epoch(&mut self, now: f64) -> Result<()> {
        self.update_locks(now);
        let unlocked: Vec<((Floor, Direction), u64)> = self.calls.iter().filter(|(_, r)| !r.locked).map(|(&k, r)| (k, r.id)).collect();
        if !unlocked.is_empty() {
            let calls: Vec<HallCall> = unlocked
                .iter()
                .map(|&((floor, direction), _)| {
                    let r = &self.calls[&(floor, direction)];
                    HallCall { id: r.id, floor, direction, press_time: r.press_time, assigned_car: r.assigned, locked: false }
                })
                .collect();
            let snapshots = self
                .cars
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let mut state = c.state.clone();
                    state.pickups.retain(|p| self.calls.get(&(p.floor, p.direction)).is_some_and(|r| r.id == p.call && r.locked));
                    CarSnapshot::new(k, now, state)
                })
                .collect();
            let view = EpochView { now, env: &self.env, cars: snapshots, calls };
            let choice = self.scheduler.assign(&view)?;
            if choice.len() != view.calls.len() || choice.iter().flatten().any(|&c| c >= self.cars.len()) {
                return domain(format!("scheduler {} returned an invalid assignment", self.scheduler.name()));
            }
            for (&(key, id), &car) in unlocked.iter().zip(&choice) {
                let rec = self.calls.get_mut(&key).expect("call present");
                if rec.assigned.is_some() && rec.assigned != car {
                    self.reassignments += 1;
                }
                if rec.assigned != car {
                    rec.assigned = car;
                    if let Some(c) = car {
                        self.log(now, "assign", Some(c), Some(key.0), Some(id), None);
                    }
                }
            }
        }
        for k in 0..self.cars.len() {
            let mut pickups: Vec<Pickup> = self
                .calls
                .iter()
                .filter(|(_, r)| r.assigned == Some(k))
                .map(|(&(floor, direction), r)| Pickup { call: r.id, floor, direction, press_time: r.press_time, destination: None })
                .collect();
            pickups.sort_by_key(|p| p.call);
            self.cars[k].state.pickups = pickups;
        }
        for k in 0..self.cars.len() {
            let mut b = Vec::new();
            self.cars[k].state.refresh(&self.env, now, &mut b);
            self.apply_transitions(k, now, &mut b);
            self.reschedule(k);
        }
        Ok(())
    }
}
