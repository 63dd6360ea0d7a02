//! Volumetric exploration: a sampled local graph scored by unseen volume,
//! and a sparse global graph for repositioning and homing.

mod gain;
mod global;
mod local;
mod select;

use thiserror::Error;

pub use gain::{exploration_gain, visible_unknown, GainParams};
pub use global::{plan_homing, plan_repositioning, update_global_graph, Candidate, GlobalGraph, GlobalParams, Repositioning};
pub use local::{sample_local_graph, LocalGraphParams};
pub use select::{select_best_path, GainedPath};

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("root pose is in collision")]
    RootInCollision,
    #[error("graph is empty")]
    EmptyGraph,
    #[error("{gains} gains for {vertices} vertices")]
    GainCount { gains: usize, vertices: usize },
    #[error("vertex {0} is not in the global graph")]
    UnknownVertex(usize),
    #[error("no path from vertex {from} to the mission start")]
    Disconnected { from: usize },
}
