//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use liftsched_core::MotionLimits;

pub const DT: f64 = 1e-3;

pub const KINEMATICS_TOLERANCE: f64 = 5e-3;

/// One integrated run: the car starts at `v0` with zero acceleration,
/// speeds up toward the rated speed, and begins braking at `brake_at`.
pub struct Run {
    pub time: f64,
    pub distance: f64,
    pub peak_speed: f64,
    pub peak_accel: f64,
}

pub fn integrate(v0: f64, brake_at: f64, lim: &MotionLimits) -> Run {
    let (vmax, amax, jm) = (lim.rated_speed, lim.max_accel, lim.max_jerk);
    let (mut t, mut p, mut v, mut a) = (0.0, 0.0, v0, 0.0f64);
    let (mut braking, mut releasing) = (false, false);
    let (mut peak_speed, mut peak_accel) = (v0, 0.0f64);
    loop {
        if !braking && t >= brake_at {
            braking = true;
        }
        let j = if !braking {
            if v + a * a / (2.0 * jm) >= vmax - 1e-12 {
                if a > 0.0 { -jm } else { 0.0 }
            } else if a < amax {
                jm
            } else {
                0.0
            }
        } else if releasing || (a < 0.0 && v <= a * a / (2.0 * jm)) {
            releasing = true;
            jm
        } else if a > -amax {
            -jm
        } else {
            0.0
        };
        let v_prev = v;
        if releasing && a + j * DT >= 0.0 {
            // The ramp-out ends the trip once the deceleration is gone.
            let h = -a / j;
            p += v * h + a * h * h / 2.0 + j * h * h * h / 6.0;
            return Run { time: t + h, distance: p, peak_speed, peak_accel };
        }
        p += v * DT + a * DT * DT / 2.0 + j * DT * DT * DT / 6.0;
        v += a * DT + j * DT * DT / 2.0;
        a += j * DT;
        if !braking && j < 0.0 && a < 0.0 {
            a = 0.0;
        }
        if !braking {
            v = v.min(vmax);
        }
        a = a.clamp(-amax, amax);
        t += DT;
        peak_speed = peak_speed.max(v);
        peak_accel = peak_accel.max(a.abs());
        if braking && !releasing && v <= 0.0 {
            let frac = v_prev / (v_prev - v);
            return Run { time: t - DT + frac * DT, distance: p, peak_speed, peak_accel };
        }
    }
}

/// Integrated run that comes to rest `distance` ahead, found by bisecting
/// on the braking instant.
pub fn oracle(v0: f64, distance: f64, lim: &MotionLimits) -> Run {
    let mut hi = 1.0;
    while integrate(v0, hi, lim).distance < distance {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if integrate(v0, mid, lim).distance < distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    integrate(v0, hi, lim)
}

