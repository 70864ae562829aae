//! Seeded fixtures shared by the benchmarks.

use liftsched_core::verify::{random_calls, random_car};
use liftsched_core::{generate, Arrival, BuildingConfig, CarEnv, CarSnapshot, HallCall, Pattern, TrafficSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A building with `cars` cars in mixed states and `calls` unassigned hall
/// calls, all at t = 100 s.
pub struct System {
    pub env: CarEnv,
    pub cars: Vec<CarSnapshot>,
    pub calls: Vec<HallCall>,
}

pub fn system(floors: usize, cars: usize, calls: usize, seed: u64) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = BuildingConfig::new(floors, cars).env();
    let now = 100.0;
    let mut snaps: Vec<CarSnapshot> = (0..cars).map(|k| random_car(&mut rng, &env, k, now, 16)).collect();
    for s in &mut snaps {
        s.state.refresh(&env, now, &mut Vec::new());
    }
    let calls = random_calls(&mut rng, floors, calls.min(2 * floors - 2), now, &[]);
    System { env, cars: snaps, calls }
}

/// Inter-floor traffic for one benchmark building.
pub fn traffic(building: &BuildingConfig, rate: f64, duration: f64, seed: u64) -> Vec<Arrival> {
    generate(&TrafficSpec { pattern: Pattern::Interfloor, rate, duration, seed }, building).expect("valid traffic spec")
}
