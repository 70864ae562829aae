//! Group elevator scheduling by submodular maximization over a partition
//! matroid, together with a discrete-event simulator, traffic generation and
//! baseline dispatchers.

pub mod building;
pub mod car;
pub mod error;
pub mod experiment;
pub mod kinematics;
pub mod schedulers;
pub mod sim;
pub mod submodular;
pub mod traffic;
pub mod verify;
pub mod waiting;

pub use building::{BuildingConfig, CarEnv, Direction, Floor, FloorSet, Heading};
pub use error::{Error, Result};
pub use kinematics::{CarKinematicState, DoorState, DoorTiming, MotionLimits, SCurve};
pub use waiting::{build_weights, CarSnapshot, DestinationDistribution, HallCall, WeightConfig, WeightSet};
pub use submodular::{brute_force_optimal, check_submodular, greedy_maximize, AssignmentSet, GroundElement, Objective, PartitionMatroid};
pub use traffic::{generate, Arrival, Pattern, TrafficSpec};
pub use sim::{run, EpochView, Passenger, RunStats, Scheduler, SimOptions};
pub use schedulers::{SchedulerKind, SubmodularScheduler, EtaScheduler, CollectiveScheduler, FixedScheduler};
pub use experiment::{run_grid, ComparisonReport, GridConfig};
