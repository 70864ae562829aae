//! Building geometry, directions and floor sets shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kinematics::{DoorTiming, MotionLimits, TravelTable};

/// Floors are numbered from 0 (the lobby) upward.
pub type Floor = usize;

/// Largest building the bitset representation supports.
pub const MAX_FLOORS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn between(from: Floor, to: Floor) -> Option<Direction> {
        match to.cmp(&from) {
            std::cmp::Ordering::Greater => Some(Direction::Up),
            std::cmp::Ordering::Less => Some(Direction::Down),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

/// Committed direction of a car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Heading {
    Up,
    Down,
    #[default]
    Idle,
}

impl From<Direction> for Heading {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Up => Heading::Up,
            Direction::Down => Heading::Down,
        }
    }
}

impl Heading {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Heading::Up => Some(Direction::Up),
            Heading::Down => Some(Direction::Down),
            Heading::Idle => None,
        }
    }
}

/// A set of floors packed into a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FloorSet(u64);

impl FloorSet {
    pub const EMPTY: FloorSet = FloorSet(0);

    pub fn contains(self, floor: Floor) -> bool {
        floor < MAX_FLOORS && self.0 & (1 << floor) != 0
    }

    pub fn insert(&mut self, floor: Floor) {
        debug_assert!(floor < MAX_FLOORS);
        self.0 |= 1 << floor;
    }

    /// Returns whether the floor was present.
    pub fn remove(&mut self, floor: Floor) -> bool {
        let had = self.contains(floor);
        self.0 &= !(1u64 << floor);
        had
    }

    pub fn union(self, other: FloorSet) -> FloorSet {
        FloorSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn min(self) -> Option<Floor> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as Floor)
    }

    pub fn max(self) -> Option<Floor> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as Floor)
    }

    /// Floors `>= floor`.
    pub fn at_or_above(self, floor: Floor) -> FloorSet {
        if floor >= MAX_FLOORS {
            return FloorSet::EMPTY;
        }
        FloorSet(self.0 & (u64::MAX << floor))
    }

    /// Floors `<= floor`.
    pub fn at_or_below(self, floor: Floor) -> FloorSet {
        if floor >= MAX_FLOORS - 1 {
            return self;
        }
        FloorSet(self.0 & ((1u64 << (floor + 1)) - 1))
    }

    pub fn iter(self) -> impl Iterator<Item = Floor> {
        (0..MAX_FLOORS).filter(move |&f| self.contains(f))
    }
}

impl FromIterator<Floor> for FloorSet {
    fn from_iter<I: IntoIterator<Item = Floor>>(iter: I) -> Self {
        let mut set = FloorSet::EMPTY;
        for f in iter {
            set.insert(f);
        }
        set
    }
}

/// Static description of a building and its cars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingConfig {
    pub floors: usize,
    #[serde(default = "default_floor_height")]
    pub floor_height: f64,
    pub cars: usize,
    #[serde(default = "default_capacity")]
    pub car_capacity: u32,
    #[serde(default)]
    pub motion: MotionLimits,
    #[serde(default)]
    pub doors: DoorTiming,
    /// Persons in the building; scales arrival rates.
    pub population: u32,
}

fn default_floor_height() -> f64 {
    3.5
}

fn default_capacity() -> u32 {
    16
}

/// Persons per floor assumed when a scenario leaves the population out.
pub const DEFAULT_POPULATION_PER_FLOOR: u32 = 10;

impl BuildingConfig {
    /// A building with default kinematics, door times and population.
    pub fn new(floors: usize, cars: usize) -> Self {
        BuildingConfig {
            floors,
            floor_height: default_floor_height(),
            cars,
            car_capacity: default_capacity(),
            motion: MotionLimits::default(),
            doors: DoorTiming::default(),
            population: DEFAULT_POPULATION_PER_FLOOR * floors as u32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.floors < 2 || self.floors > MAX_FLOORS {
            return domain(format!("floors must be in [2, {MAX_FLOORS}], got {}", self.floors));
        }
        if self.cars < 1 {
            return domain("a building needs at least one car");
        }
        if self.car_capacity < 1 {
            return domain("car capacity must be at least 1");
        }
        if !(self.floor_height.is_finite() && self.floor_height > 0.0) {
            return domain("floor height must be positive");
        }
        self.motion.validate()?;
        self.doors.validate()
    }

    pub fn top(&self) -> Floor {
        self.floors - 1
    }

    /// Upper bound on simultaneously active hall calls.
    pub fn max_hall_calls(&self) -> usize {
        2 * self.floors - 2
    }

    /// Whether a hall button exists for this floor and direction.
    pub fn has_button(&self, floor: Floor, direction: Direction) -> bool {
        floor < self.floors
            && match direction {
                Direction::Up => floor < self.top(),
                Direction::Down => floor > 0,
            }
    }

    pub fn env(&self) -> CarEnv {
        CarEnv {
            floors: self.floors,
            floor_height: self.floor_height,
            motion: self.motion,
            doors: self.doors,
            table: TravelTable::new(self.floors, self.floor_height, &self.motion),
        }
    }
}

/// Precomputed per-building data used by car control and planning.
#[derive(Debug, Clone)]
pub struct CarEnv {
    pub floors: usize,
    pub floor_height: f64,
    pub motion: MotionLimits,
    pub doors: DoorTiming,
    pub table: TravelTable,
}

impl CarEnv {
    pub fn position(&self, floor: Floor) -> f64 {
        floor as f64 * self.floor_height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_set_ranges() {
        let s: FloorSet = [1, 4, 7].into_iter().collect();
        assert_eq!(s.at_or_above(4).iter().collect::<Vec<_>>(), vec![4, 7]);
        assert_eq!(s.at_or_below(4).iter().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(s.at_or_above(8), FloorSet::EMPTY);
        assert_eq!(s.min(), Some(1));
        assert_eq!(s.max(), Some(7));
        assert_eq!(s.at_or_below(63), s);
    }

    #[test]
    fn terminal_floors_have_one_button() {
        let b = BuildingConfig::new(8, 3);
        assert!(!b.has_button(0, Direction::Down));
        assert!(!b.has_button(7, Direction::Up));
        assert!(b.has_button(0, Direction::Up) && b.has_button(7, Direction::Down));
        assert_eq!(b.max_hall_calls(), 14);
    }

    #[test]
    fn building_validation() {
        assert!(BuildingConfig::new(1, 1).validate().is_err());
        assert!(BuildingConfig::new(8, 0).validate().is_err());
        assert!(BuildingConfig::new(8, 2).validate().is_ok());
    }
}
