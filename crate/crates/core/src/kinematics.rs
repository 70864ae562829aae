//! Jerk-limited travel times and door-cycle arithmetic.
//!
//! Every waiting-time estimate in the crate is assembled from two primitives:
//! the minimum time for a car to travel between two hoistway positions under
//! speed, acceleration and jerk limits, and the time left in the current door
//! cycle. Motion follows the symmetric seven-phase S-curve:
//!
//! ```text
//!   jerk: +J | 0 | -J | 0 (cruise) | -J | 0 | +J
//! ```
//!
//! with three regimes depending on the distance: rated speed is reached,
//! only the acceleration limit is reached, or neither is.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Speed, acceleration and jerk limits of one car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    /// m/s
    pub rated_speed: f64,
    /// m/s²
    pub max_accel: f64,
    /// m/s³
    pub max_jerk: f64,
}

impl MotionLimits {
    pub fn new(rated_speed: f64, max_accel: f64, max_jerk: f64) -> Result<Self> {
        let limits = MotionLimits { rated_speed, max_accel, max_jerk };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.rated_speed) && ok(self.max_accel) && ok(self.max_jerk) {
            Ok(())
        } else {
            domain(format!("motion limits must be strictly positive: {self:?}"))
        }
    }
}

impl Default for MotionLimits {
    fn default() -> Self {
        MotionLimits { rated_speed: 1.6, max_accel: 1.0, max_jerk: 1.6 }
    }
}

/// Door operation times, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoorTiming {
    pub open_time: f64,
    pub dwell_time: f64,
    pub close_time: f64,
}

impl DoorTiming {
    pub fn new(open_time: f64, dwell_time: f64, close_time: f64) -> Result<Self> {
        let timing = DoorTiming { open_time, dwell_time, close_time };
        timing.validate()?;
        Ok(timing)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.open_time) && ok(self.dwell_time) && ok(self.close_time) {
            Ok(())
        } else {
            domain(format!("door times must be non-negative: {self:?}"))
        }
    }

    /// Full stop cost: open, dwell and close.
    pub fn total(&self) -> f64 {
        self.open_time + self.dwell_time + self.close_time
    }
}

impl Default for DoorTiming {
    fn default() -> Self {
        DoorTiming { open_time: 2.0, dwell_time: 3.0, close_time: 3.0 }
    }
}

/// Door phase with the time already spent in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DoorState {
    Closed,
    Opening(f64),
    Open(f64),
    Closing(f64),
}

/// Dynamic state of a car as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarKinematicState {
    /// Meters above the lobby landing.
    pub position: f64,
    /// Signed, positive is up.
    pub velocity: f64,
    pub door_state: DoorState,
}

impl CarKinematicState {
    pub fn at_rest(position: f64) -> Self {
        CarKinematicState { position, velocity: 0.0, door_state: DoorState::Closed }
    }

    pub fn validate(&self, limits: &MotionLimits) -> Result<()> {
        if !self.position.is_finite() || self.position < 0.0 {
            return domain(format!("position must be >= 0, got {}", self.position));
        }
        if !self.velocity.is_finite() || self.velocity.abs() > limits.rated_speed * (1.0 + 1e-12) {
            return domain(format!("|velocity| {} exceeds rated speed", self.velocity));
        }
        if self.velocity != 0.0 && self.door_state != DoorState::Closed {
            return domain("a moving car must have its doors closed");
        }
        Ok(())
    }
}

/// Time to change speed by `delta_v` starting and ending at zero acceleration.
pub fn velocity_change_time(delta_v: f64, limits: &MotionLimits) -> f64 {
    let (a, j) = (limits.max_accel, limits.max_jerk);
    if delta_v <= 0.0 {
        0.0
    } else if delta_v >= a * a / j {
        delta_v / a + a / j
    } else {
        2.0 * (delta_v / j).sqrt()
    }
}

/// Distance covered while changing speed from `v0` to `v1` with zero
/// acceleration at both ends. The velocity curve is point-symmetric, so the
/// mean speed is the midpoint.
fn velocity_change_distance(v0: f64, v1: f64, limits: &MotionLimits) -> f64 {
    0.5 * (v0 + v1) * velocity_change_time((v1 - v0).abs(), limits)
}

/// Phase durations of a rest-to-rest S-curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCurve {
    pub distance: f64,
    /// Length of each constant-jerk ramp.
    pub ramp: f64,
    /// Length of each constant-acceleration segment.
    pub hold: f64,
    /// Length of the constant-speed segment.
    pub cruise: f64,
    pub jerk: f64,
}

impl SCurve {
    pub fn new(distance: f64, limits: &MotionLimits) -> Self {
        let (v, a, j) = (limits.rated_speed, limits.max_accel, limits.max_jerk);
        let d = distance.max(0.0);
        if d == 0.0 {
            return SCurve { distance: 0.0, ramp: 0.0, hold: 0.0, cruise: 0.0, jerk: j };
        }
        let v_accel = a * a / j;
        // Regime 1: rated speed is reached.
        let (ramp_v, hold_v) = if v >= v_accel { (a / j, v / a - a / j) } else { ((v / j).sqrt(), 0.0) };
        let full = v * (2.0 * ramp_v + hold_v);
        if d >= full {
            return SCurve { distance: d, ramp: ramp_v, hold: hold_v, cruise: (d - full) / v, jerk: j };
        }
        // Regime 3: acceleration limit never reached.
        let peak = (d * j.sqrt() / 2.0).powf(2.0 / 3.0);
        if peak <= v_accel {
            return SCurve { distance: d, ramp: (peak / j).sqrt(), hold: 0.0, cruise: 0.0, jerk: j };
        }
        // Regime 2: acceleration limit reached, rated speed not.
        let peak = a * (-a / j + (a * a / (j * j) + 4.0 * d / a).sqrt()) / 2.0;
        SCurve { distance: d, ramp: a / j, hold: (peak / a - a / j).max(0.0), cruise: 0.0, jerk: j }
    }

    pub fn duration(&self) -> f64 {
        4.0 * self.ramp + 2.0 * self.hold + self.cruise
    }

    fn phases(&self) -> [(f64, f64); 7] {
        let j = self.jerk;
        [
            (self.ramp, j),
            (self.hold, 0.0),
            (self.ramp, -j),
            (self.cruise, 0.0),
            (self.ramp, -j),
            (self.hold, 0.0),
            (self.ramp, j),
        ]
    }

    /// (position, velocity, acceleration) at `t` seconds after departure.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let (mut p, mut v, mut a) = (0.0, 0.0, 0.0);
        let mut left = t.max(0.0);
        for (len, jerk) in self.phases() {
            let dt = left.min(len);
            p += v * dt + a * dt * dt / 2.0 + jerk * dt * dt * dt / 6.0;
            v += a * dt + jerk * dt * dt / 2.0;
            a += jerk * dt;
            left -= dt;
            if left <= 0.0 {
                break;
            }
        }
        if t >= self.duration() {
            return (self.distance, 0.0, 0.0);
        }
        (p, v, a)
    }

    /// Latest time after a common departure up to which this profile and
    /// `other` coincide. A car following `self` may switch to `other` at any
    /// time up to this instant without violating the limits.
    pub fn divergence(&self, other: &SCurve) -> f64 {
        let mine = self.phases();
        let theirs = other.phases();
        let mut t = 0.0;
        for (m, o) in mine.iter().zip(theirs.iter()) {
            if (m.0 - o.0).abs() > 1e-12 {
                return t + m.0.min(o.0);
            }
            t += m.0;
        }
        t
    }
}

/// Minimum time to cover `distance` starting and ending at rest.
pub fn travel_time_rest_to_rest(distance: f64, limits: &MotionLimits) -> Result<f64> {
    if !distance.is_finite() || distance < 0.0 {
        return domain(format!("distance must be >= 0, got {distance}"));
    }
    limits.validate()?;
    Ok(SCurve::new(distance, limits).duration())
}

/// Time for a car currently moving at constant speed (zero acceleration) to
/// come to rest at `target`.
///
/// If the car cannot stop in time, or moves away from the target, it brakes
/// as hard as the limits allow and then travels rest-to-rest back.
pub fn travel_time_from_motion(state: &CarKinematicState, target: f64, limits: &MotionLimits) -> Result<f64> {
    limits.validate()?;
    state.validate(limits)?;
    if !target.is_finite() {
        return domain("target must be finite");
    }
    let speed = state.velocity.abs();
    if speed == 0.0 {
        return travel_time_rest_to_rest((target - state.position).abs(), limits);
    }
    let heading = state.velocity.signum();
    let ahead = (target - state.position) * heading;
    let stop_time = velocity_change_time(speed, limits);
    let stop_distance = velocity_change_distance(speed, 0.0, limits);
    if ahead < stop_distance {
        let stop_position = state.position + heading * stop_distance;
        return Ok(stop_time + travel_time_rest_to_rest((stop_position - target).abs(), limits)?);
    }

    // Accelerate to some peak, cruise, then brake. The covered distance grows
    // with the peak, so bisect for the largest peak that still fits.
    let covered = |peak: f64| velocity_change_distance(speed, peak, limits) + velocity_change_distance(peak, 0.0, limits);
    let peak = if covered(limits.rated_speed) <= ahead {
        limits.rated_speed
    } else {
        let (mut lo, mut hi) = (speed, limits.rated_speed);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if covered(mid) <= ahead {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let cruise = (ahead - covered(peak)).max(0.0) / peak;
    Ok(velocity_change_time(peak - speed, limits) + cruise + velocity_change_time(peak, limits))
}

/// Time until the doors are fully closed, following open, dwell, close.
pub fn door_cycle_remaining(timing: &DoorTiming, door: DoorState) -> Result<f64> {
    let check = |elapsed: f64, len: f64, phase: &str| -> Result<()> {
        if !elapsed.is_finite() || elapsed < 0.0 || elapsed > len + 1e-9 {
            domain(format!("{phase} elapsed {elapsed} s outside [0, {len}]"))
        } else {
            Ok(())
        }
    };
    Ok(match door {
        DoorState::Closed => 0.0,
        DoorState::Opening(e) => {
            check(e, timing.open_time, "opening")?;
            (timing.open_time - e).max(0.0) + timing.dwell_time + timing.close_time
        }
        DoorState::Open(e) => {
            check(e, timing.dwell_time, "open")?;
            (timing.dwell_time - e).max(0.0) + timing.close_time
        }
        DoorState::Closing(e) => {
            check(e, timing.close_time, "closing")?;
            (timing.close_time - e).max(0.0)
        }
    })
}

/// Rest-to-rest profiles for every whole-floor distance in a building with
/// uniform floor height.
#[derive(Debug, Clone)]
pub struct TravelTable {
    profiles: Vec<SCurve>,
}

impl TravelTable {
    pub fn new(floors: usize, floor_height: f64, limits: &MotionLimits) -> Self {
        let profiles = (0..floors.max(1)).map(|k| SCurve::new(k as f64 * floor_height, limits)).collect();
        TravelTable { profiles }
    }

    pub fn profile(&self, floors_apart: usize) -> &SCurve {
        &self.profiles[floors_apart]
    }

    pub fn time(&self, from: usize, to: usize) -> f64 {
        self.profiles[from.abs_diff(to)].duration()
    }
}
