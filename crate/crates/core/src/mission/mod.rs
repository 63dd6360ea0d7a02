//! Tick-driven missions: explore, inspect and return home over a simulated
//! world, with the report, CSV set and map written to an output directory.

mod config;
mod metrics;
mod persist;
mod report;
mod run;

use thiserror::Error;

use crate::explore::ExploreError;
use crate::inspect::InspectError;
use crate::map::MapError;
use crate::safety::SafetyError;
use crate::world::WorldError;

pub use config::{Bounds, Limits, MissionConfig, Mode, PlannerSettings, Seeds, SensorOverrides};
pub use metrics::{compute_metrics, read_trajectory_csv, write_trajectory_csv, Metrics, MissionLog, TickRecord};
pub use persist::{load_map, save_map};
pub use report::{MissionReport, PhaseReport};
pub use run::{run_mission, ExploreStep, MissionRun};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Scenario(#[from] WorldError),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("planner: {0}")]
    Planner(String),
    #[error("log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MissionError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            MissionError::Config(_) | MissionError::Log(_) | MissionError::Io(_) => 2,
            MissionError::Scenario(_) | MissionError::Map(_) => 3,
            MissionError::Planner(_) => 4,
        }
    }
}

impl From<ExploreError> for MissionError {
    fn from(e: ExploreError) -> Self {
        MissionError::Planner(e.to_string())
    }
}

impl From<InspectError> for MissionError {
    fn from(e: InspectError) -> Self {
        MissionError::Planner(e.to_string())
    }
}

impl From<SafetyError> for MissionError {
    fn from(e: SafetyError) -> Self {
        MissionError::Planner(e.to_string())
    }
}
