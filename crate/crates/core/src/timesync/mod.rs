//! Clock domains and the payload's synchronization scheme: two-way PTP
//! offset estimation for Ethernet devices, IMU-generated trigger pulses,
//! trigger-to-frame assignment for triggered sensors and sampling-interval
//! statistics.

mod assign;
mod bench;
mod clock;
mod ptp;
mod stats;
mod trigger;

use thiserror::Error;

pub use assign::{
    assign_frames_to_triggers, hungarian, AssignedFrame, Assignment, ExposureProfile,
};
pub use bench::{
    calibrated_bench, run_bench, BenchConfig, BenchReport, FreeRunningStream, PtpStream,
    TriggeredSensor,
};
pub use clock::{host_timestamp_imu, ClockDomain, ClockKind, HostLink};
pub use ptp::{ptp_estimate_offset, PtpEstimate, PtpExchange};
pub use stats::{interval_stats, write_stats_csv, IntervalStats, SyncRow};
pub use trigger::{
    generate_triggers, trigger_schedule, SharedTriggerBuffer, TriggerBuffer, TriggerEntry,
};

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("PTP exchange rejected: negative path delay {0} s")]
    NegativePathDelay(f64),
    #[error("PTP exchange timestamps out of order")]
    UnorderedExchange,
    #[error("need at least 2 timestamps, got {0}")]
    TooFewSamples(usize),
    #[error("timestamps not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("trigger buffer is empty")]
    EmptyBuffer,
    #[error("trigger sequence {found} does not follow {last}")]
    NonContiguous { last: u64, found: u64 },
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("invalid exposure profile: {0}")]
    InvalidProfile(String),
    #[error("rate and horizon must be positive")]
    InvalidRate,
}
