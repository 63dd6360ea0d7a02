use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collision::RobotBox;
use crate::geometry::{Aabb, Vec3};
use crate::map::MapParams;
use crate::world::{Generator, ScenarioDescriptor, VoxelWorld};

use super::MissionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    Inspect,
    Home,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Explore => "explore",
            Mode::Inspect => "inspect",
            Mode::Home => "home",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = MissionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "explore" => Ok(Mode::Explore),
            "inspect" => Ok(Mode::Inspect),
            "home" => Ok(Mode::Home),
            other => Err(MissionError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Axis-aligned exploration bounds in world metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(Vec3::from(self.min), Vec3::from(self.max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub planner: u64,
    pub sensors: u64,
    pub clocks: u64,
    pub drift: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { planner: 1, sensors: 2, clocks: 3, drift: 4 }
    }
}

/// Sensor and clock settings that differ from the payload defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorOverrides {
    /// Rate at which LiDAR scans are integrated into the map.
    pub map_rate: f64,
    pub lidar_resolution_deg: f64,
    pub lidar_range: f64,
    pub range_noise_sigma: f64,
    pub lidar_clock_offset: f64,
    pub lidar_drift_ppm: f64,
    pub lidar_jitter: f64,
    /// Seconds between PTP exchanges.
    pub ptp_interval: f64,
    pub tof_latency: f64,
    pub tof_jitter: f64,
    /// Pose drift per metre travelled; zero disables drift.
    pub drift_rate: f64,
}

impl Default for SensorOverrides {
    fn default() -> Self {
        Self {
            map_rate: 5.0,
            lidar_resolution_deg: 2.0,
            lidar_range: 30.0,
            range_noise_sigma: 0.0,
            lidar_clock_offset: 0.37,
            lidar_drift_ppm: 20.0,
            lidar_jitter: 5e-6,
            ptp_interval: 1.0,
            tof_latency: 2e-3,
            tof_jitter: 0.6e-3,
            drift_rate: 0.0,
        }
    }
}

/// Simulated-time budgets per phase, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub explore: f64,
    pub inspect: f64,
    pub home: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { explore: 600.0, inspect: 600.0, home: 120.0 }
    }
}

/// Mission-level planner thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    /// Distance discount of the local planner, 1/m.
    pub lambda: f64,
    /// Local planning box around the robot.
    pub local_extent: [f64; 3],
    /// Best local path gain below which the local planner reports a dead end.
    pub local_min_gain: f64,
    /// Local paths in a row that map nothing before forcing repositioning.
    pub stall_limit: usize,
    /// Repositioning attempts on one candidate before it is dropped.
    pub reposition_retries: usize,
    /// A viewpoint counts as visited when the body passes this close.
    pub viewpoint_tolerance: f64,
    /// Seconds without path progress before the tracker gives up.
    pub stuck_time: f64,
    /// Replanning attempts for inspection and homing.
    pub retries: usize,
    /// Scans taken at the start before the first plan.
    pub warmup_scans: u64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            local_extent: [20.0, 20.0, 6.0],
            local_min_gain: 5.0,
            stall_limit: 3,
            reposition_retries: 2,
            viewpoint_tolerance: 0.3,
            stuck_time: 8.0,
            retries: 3,
            warmup_scans: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub name: String,
    pub scenario: ScenarioDescriptor,
    pub modes: Vec<Mode>,
    pub bounds: Bounds,
    #[serde(default = "default_max_height")]
    pub max_height: f64,
    #[serde(default = "default_standoff")]
    pub standoff: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub sensors: SensorOverrides,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub planner: PlannerSettings,
    #[serde(default)]
    pub map: MapParams,
    /// Box every planner keeps free, wider than the body so planned paths
    /// stay outside the safety policy's stopping envelope.
    #[serde(default = "default_clearance")]
    pub clearance: [f64; 3],
    /// Route commands through the safety policy.
    #[serde(default = "default_true")]
    pub safety_filter: bool,
    /// Map saved by an earlier mission to start from instead of a blank one.
    #[serde(default)]
    pub prior_map: Option<PathBuf>,
    /// Where the report and CSV set are written; nothing is written if unset.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_max_height() -> f64 {
    3.0
}

fn default_standoff() -> f64 {
    2.0
}

fn default_clearance() -> [f64; 3] {
    [1.0, 1.0, 0.5]
}

fn default_true() -> bool {
    true
}

impl MissionConfig {
    /// Explore, inspect and home over a bundled scenario, bounded by the
    /// whole world.
    pub fn bundled(generator: Generator) -> Self {
        let scenario = ScenarioDescriptor::bundled(generator);
        let max = scenario.dims;
        Self {
            name: generator.name().to_string(),
            scenario,
            modes: vec![Mode::Explore, Mode::Inspect, Mode::Home],
            bounds: Bounds { min: [0.0; 3], max },
            max_height: default_max_height(),
            standoff: default_standoff(),
            seeds: Seeds::default(),
            sensors: SensorOverrides::default(),
            limits: Limits::default(),
            planner: PlannerSettings::default(),
            map: MapParams::default(),
            clearance: default_clearance(),
            safety_filter: true,
            prior_map: None,
            output_dir: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, MissionError> {
        toml::from_str(text).map_err(|e| MissionError::Config(e.to_string()))
    }

    pub fn load(path: &FsPath) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MissionError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the config on its own.
    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |m: String| Err(MissionError::Config(m));
        if self.modes.is_empty() {
            return bad("mode sequence is empty".into());
        }
        if !(self.max_height > 0.0) {
            return bad(format!("max_height must be positive, got {}", self.max_height));
        }
        if !(self.standoff > 0.0) {
            return bad(format!("standoff must be positive, got {}", self.standoff));
        }
        let b = &self.bounds;
        if (0..3).any(|i| !(b.min[i] < b.max[i])) {
            return bad(format!("bounds {:?}..{:?} are empty", b.min, b.max));
        }
        if self.clearance.iter().any(|c| !(*c > 0.0)) {
            return bad(format!("clearance {:?} must be positive", self.clearance));
        }
        let s = &self.sensors;
        if !(s.map_rate > 0.0) || !(s.lidar_resolution_deg > 0.0) || !(s.lidar_range > 0.0) || !(s.ptp_interval > 0.0) {
            return bad("sensor rates, resolution and range must be positive".into());
        }
        if !(s.range_noise_sigma >= 0.0) || !(s.drift_rate >= 0.0) || !(s.lidar_jitter >= 0.0) || !(s.tof_jitter >= 0.0) {
            return bad("noise, jitter and drift must be non-negative".into());
        }
        let first = |m: Mode| self.modes.iter().position(|x| *x == m);
        if let (Some(i), Some(e)) = (first(Mode::Inspect), first(Mode::Explore)) {
            if i < e {
                return bad("inspect is sequenced before explore".into());
            }
        }
        let p = &self.planner;
        if !(p.lambda >= 0.0) || p.local_extent.iter().any(|e| !(*e > 0.0)) || !(p.viewpoint_tolerance > 0.0) || !(p.stuck_time > 0.0) {
            return bad("planner discount must be non-negative; extents, tolerance and stuck time positive".into());
        }
        self.map.validate().map_err(|e| MissionError::Config(e.to_string()))?;
        if self.modes.contains(&Mode::Inspect) && !self.modes.contains(&Mode::Explore) && self.prior_map.is_none() {
            return bad("inspect needs an explore phase or a prior map".into());
        }
        Ok(())
    }

    /// Checks the bounds against the built world.
    pub fn clearance_box(&self) -> RobotBox {
        RobotBox { size: Vec3::from(self.clearance) }
    }

    pub fn validate_for(&self, world: &VoxelWorld) -> Result<(), MissionError> {
        let w = world.grid().bounds();
        let b = &self.bounds;
        let eps = 1e-9;
        if (0..3).any(|i| b.min[i] < w.min[i] - eps || b.max[i] > w.max[i] + eps) {
            return Err(MissionError::Config(format!(
                "bounds {:?}..{:?} exceed the world {:?}..{:?}",
                b.min,
                b.max,
                <[f64; 3]>::from(w.min),
                <[f64; 3]>::from(w.max)
            )));
        }
        if !self.bounds.aabb().contains(&world.start_pose().position) {
            return Err(MissionError::Config("start pose lies outside the bounds".into()));
        }
        if world.start_pose().position.z > self.max_height {
            return Err(MissionError::Config(format!(
                "start height {:.3} m exceeds max_height {}",
                world.start_pose().position.z,
                self.max_height
            )));
        }
        Ok(())
    }
}
