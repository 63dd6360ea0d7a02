//! Deterministic desk-scale simulator for a multi-modal autonomy payload.
//!
//! The crate bundles a ground-truth voxel world with simulated LiDAR, ToF,
//! camera and radar sensors, per-device clock models with trigger-based
//! synchronization, an online log-odds occupancy map, a graph-based
//! exploration planner, a surface inspection planner, a depth-driven safety
//! navigator and a tick-driven mission runner tying them together.
//!
//! Everything is a pure function of its inputs and seeds: two runs of the
//! same configuration produce byte-identical reports.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod collision;
pub mod explore;
pub mod geometry;
pub mod graph;
pub mod inspect;
pub mod map;
pub mod mission;
pub mod safety;
pub mod timesync;
pub mod world;
