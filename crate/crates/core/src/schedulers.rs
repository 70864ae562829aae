//! Dispatchers: submodular greedy and its ablations, ETA, and collective
//! control.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::building::{CarEnv, Direction, Floor, Heading};
use crate::car::Phase;
use crate::error::{domain, Result};
use crate::sim::{EpochView, Scheduler};
use crate::submodular::{greedy_maximize, Objective, PartitionMatroid};
use crate::waiting::{build_weights, capacity_penalty, service_plan, CarSnapshot, DestinationDistribution, PlannedStop, WeightConfig};

/// Which dispatcher to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerKind {
    SubmodularGreedy {
        #[serde(default)]
        weights: WeightConfig,
    },
    /// Submodular greedy with pairwise and higher-order terms forced to zero.
    UnaryOnly {
        #[serde(default)]
        coincident_bonus: bool,
    },
    Collective,
    Eta,
}

impl SchedulerKind {
    /// Named presets accepted on the command line and in grid configs.
    pub const PRESETS: [&'static str; 6] = ["submodular", "submodular_nobonus", "submodular_ho", "unary_only", "eta", "collective"];

    pub fn preset(name: &str) -> Result<SchedulerKind> {
        let greedy = |weights| SchedulerKind::SubmodularGreedy { weights };
        Ok(match name {
            "submodular" => greedy(WeightConfig::default()),
            "submodular_nobonus" => greedy(WeightConfig { coincident_bonus: false, ..WeightConfig::default() }),
            "submodular_ho" => greedy(WeightConfig { higher_order: vec![(4, 5.0), (5, 5.0)], ..WeightConfig::default() }),
            "unary_only" => SchedulerKind::UnaryOnly { coincident_bonus: false },
            "eta" => SchedulerKind::Eta,
            "collective" => SchedulerKind::Collective,
            other => return domain(format!("unknown scheduler '{other}'; known: {}", Self::PRESETS.join(", "))),
        })
    }

    pub fn build(&self, name: &str, dist: DestinationDistribution) -> Box<dyn Scheduler + Send> {
        match self {
            SchedulerKind::SubmodularGreedy { weights } => Box::new(SubmodularScheduler::new(name, weights.clone(), dist)),
            SchedulerKind::UnaryOnly { coincident_bonus } => {
                let weights = WeightConfig { pairwise: false, coincident_bonus: *coincident_bonus, ..WeightConfig::default() };
                Box::new(SubmodularScheduler::new(name, weights, dist))
            }
            SchedulerKind::Collective => Box::new(CollectiveScheduler),
            SchedulerKind::Eta => Box::new(EtaScheduler),
        }
    }
}

/// Builds weights each epoch and assigns by greedy maximization. Calls that
/// land on cars carrying the capacity penalty are re-assigned among the
/// remaining cars.
#[derive(Debug, Clone)]
pub struct SubmodularScheduler {
    name: String,
    config: WeightConfig,
    dist: DestinationDistribution,
}

impl SubmodularScheduler {
    pub fn new(name: &str, config: WeightConfig, dist: DestinationDistribution) -> Self {
        SubmodularScheduler { name: name.to_string(), config, dist }
    }
}

impl Scheduler for SubmodularScheduler {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        if view.calls.is_empty() {
            return Ok(Vec::new());
        }
        let ws = build_weights(view.env, &view.cars, &view.calls, &self.dist, &self.config)?;
        let obj = Objective::new(ws);
        let choice = greedy_maximize(&obj, &PartitionMatroid::for_weights(obj.weights())).choices();
        let mut choice: Vec<usize> = choice.into_iter().map(|c| c.expect("greedy returns a basis")).collect();

        let penalised: Vec<bool> = view.cars.iter().map(|c| capacity_penalty(c, &self.config) > 0.0).collect();
        let open: Vec<usize> = (0..view.cars.len()).filter(|&k| !penalised[k]).collect();
        let stripped: Vec<usize> = (0..choice.len()).filter(|&i| penalised[choice[i]]).collect();
        if !stripped.is_empty() && !open.is_empty() {
            let fixed: Vec<(usize, usize)> = (0..choice.len()).filter(|&i| !penalised[choice[i]]).map(|i| (i, choice[i])).collect();
            let sub = Objective::new(obj.weights().restrict(&stripped, &open, &fixed)?);
            let again = greedy_maximize(&sub, &PartitionMatroid::for_weights(sub.weights())).choices();
            for (k, &i) in stripped.iter().enumerate() {
                choice[i] = open[again[k].expect("greedy returns a basis")];
            }
        }
        Ok(choice.into_iter().map(Some).collect())
    }
}

/// Estimated-time-of-arrival dispatching: calls in press order, each to the
/// car that would reach it first given the calls already placed.
#[derive(Debug, Clone, Copy, Default)]
pub struct EtaScheduler;

impl Scheduler for EtaScheduler {
    fn name(&self) -> String {
        "eta".into()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        let mut order: Vec<usize> = (0..view.calls.len()).collect();
        order.sort_by(|&a, &b| view.calls[a].press_time.total_cmp(&view.calls[b].press_time).then(view.calls[a].id.cmp(&view.calls[b].id)));
        let mut placed: Vec<Vec<PlannedStop>> = vec![Vec::new(); view.cars.len()];
        let mut out = vec![None; view.calls.len()];
        for i in order {
            let call = &view.calls[i];
            let stop = PlannedStop { floor: call.floor, direction: call.direction, press_time: call.press_time, destination: None };
            let mut best: Option<(f64, usize)> = None;
            for (k, car) in view.cars.iter().enumerate() {
                let mut extra = placed[k].clone();
                extra.push(stop);
                let eta = *service_plan(view.env, car, &extra)?.last().expect("one stop added");
                if best.is_none_or(|(b, _)| eta < b) {
                    best = Some((eta, k));
                }
            }
            let (_, k) = best.expect("at least one car");
            placed[k].push(stop);
            out[i] = Some(k);
        }
        Ok(out)
    }
}

/// Floors a car must travel, sweeping in its running direction and turning
/// only at the building ends, before it can answer a call.
pub fn distance_in_direction(env: &CarEnv, car: &CarSnapshot, call_floor: Floor, call_dir: Direction) -> usize {
    let top = env.floors - 1;
    let at = car.state.anchor(env, car.time);
    let heading = match car.state.phase {
        Phase::Moving(trip) => Heading::from(trip.direction()),
        _ => car.state.heading,
    };
    match heading {
        Heading::Idle => at.abs_diff(call_floor),
        Heading::Up => match call_dir {
            Direction::Up if call_floor >= at => call_floor - at,
            Direction::Down => (top - at) + (top - call_floor),
            Direction::Up => (top - at) + top + call_floor,
        },
        Heading::Down => match call_dir {
            Direction::Down if call_floor <= at => at - call_floor,
            Direction::Up => at + call_floor,
            Direction::Down => at + top + (top - call_floor),
        },
    }
}

/// Group collective control: each call goes to the car with the shortest
/// distance in its running direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct CollectiveScheduler;

impl Scheduler for CollectiveScheduler {
    fn name(&self) -> String {
        "collective".into()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        Ok(view
            .calls
            .iter()
            .map(|call| {
                (0..view.cars.len()).min_by_key(|&k| (distance_in_direction(view.env, &view.cars[k], call.floor, call.direction), k))
            })
            .collect())
    }
}

/// Applies a predetermined car per (floor, direction); unknown calls go to
/// car 0.
#[derive(Debug, Clone, Default)]
pub struct FixedScheduler {
    pub by_call: BTreeMap<(Floor, Direction), usize>,
}

impl Scheduler for FixedScheduler {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn assign(&mut self, view: &EpochView<'_>) -> Result<Vec<Option<usize>>> {
        Ok(view.calls.iter().map(|c| Some(self.by_call.get(&(c.floor, c.direction)).copied().unwrap_or(0))).collect())
    }
}
