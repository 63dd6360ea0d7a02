//! Velocity-setpoint navigation behind a reactive depth-image safety layer.
//!
//! The policy sees only a partial state and the raw ToF range image, which
//! is the observation contract a learned controller would use. Obstacles
//! are judged in the horizontal plane; vertical clearance comes from the
//! map-based planners.

mod drift;
mod rollout;
mod track;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::RobotBox;
use crate::geometry::{Pose, Vec3};
use crate::world::{RangeImage, SensorModel};

pub use drift::{inject_drift, DriftModel, DriftState};
pub use rollout::{
    adversarial_corridor, clear_path, ADVERSARIAL_DRIFT, rollout, write_rollout_csv, Navigator, RolloutParams, RolloutResult, RolloutRow,
    StepOutcome,
};
pub use track::{track_path, TrackOutput, TrackParams};

#[derive(Debug, Error, PartialEq)]
pub enum SafetyError {
    #[error("depth image is {found:?}, expected {expected:?}")]
    MalformedDepth { expected: (usize, usize), found: (usize, usize) },
    #[error("goal direction must be a unit vector")]
    InvalidGoal,
    #[error("path is empty")]
    EmptyPath,
    #[error("pose is {deviation:.2} m from the path; replanning required")]
    ReplanRequest { deviation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialState {
    /// Body-frame velocity.
    pub velocity: Vec3,
    /// Roll, pitch, yaw.
    pub attitude: [f64; 3],
    /// Body-frame unit vector toward the goal.
    pub goal_dir: Vec3,
}

impl PartialState {
    pub fn new(velocity: Vec3, attitude: [f64; 3], goal_dir: Vec3) -> Result<Self, SafetyError> {
        if !goal_dir.iter().all(|c| c.is_finite()) || (goal_dir.norm() - 1.0).abs() > 1e-6 {
            return Err(SafetyError::InvalidGoal);
        }
        if !velocity.iter().all(|c| c.is_finite()) {
            return Err(SafetyError::InvalidGoal);
        }
        Ok(Self { velocity, attitude, goal_dir })
    }

    /// Builds the body-frame state from world-frame quantities. Body axes
    /// follow the yaw only.
    pub fn from_world(pose: &Pose, velocity_world: &Vec3, goal_dir_world: &Vec3) -> Result<Self, SafetyError> {
        let (s, c) = pose.yaw.sin_cos();
        let to_body = |v: &Vec3| Vec3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z);
        Self::new(to_body(velocity_world), [pose.roll, pose.pitch, pose.yaw], to_body(goal_dir_world))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Nominal,
    SafetyClamped,
    Stop,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Nominal => "nominal",
            Provenance::SafetyClamped => "safety_clamped",
            Provenance::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    /// Body-frame linear velocity.
    pub linear: Vec3,
    pub yaw_rate: f64,
    pub provenance: Provenance,
    /// Nearest obstacle distance along the motion axis, `inf` if clear.
    pub min_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyParams {
    pub v_max: f64,
    pub d_stop: f64,
    pub d_slow: f64,
    pub cone_half_angle_deg: f64,
    /// Lateral escape speed as a fraction of `v_max` at full clamp.
    pub escape_gain: f64,
    pub yaw_gain: f64,
    pub max_yaw_rate: f64,
    /// Physical body; pixels inside its swept corridor always count.
    pub robot: RobotBox,
    pub corridor_margin: f64,
    pub tof: SensorModel,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            d_stop: 0.5,
            d_slow: 1.5,
            cone_half_angle_deg: 25.0,
            escape_gain: 0.6,
            yaw_gain: 2.0,
            max_yaw_rate: 1.5,
            robot: RobotBox::physical(),
            corridor_margin: 0.06,
            tof: SensorModel::tof(),
        }
    }
}

/// Body-frame returned points of a depth image.
struct Observation {
    points: Vec<Vec3>,
    /// Per point: sensor-frame unit ray and whether it is in the left half.
    rays: Vec<(Vec3, bool)>,
    left_score: f64,
    right_score: f64,
}

impl Observation {
    fn new(depth: &RangeImage, tof: &SensorModel, clip: f64) -> Self {
        let (_, cols, dirs) = tof.ray_directions();
        let mount = tof.mount_pose.isometry();
        let mut points = Vec::new();
        let mut rays = Vec::new();
        let (mut left_score, mut right_score) = (0.0, 0.0);
        for (i, (r, d)) in depth.ranges.iter().zip(&dirs).enumerate() {
            let left = i % cols < cols / 2;
            let right = i % cols >= cols.div_ceil(2);
            let seen = r.min(clip);
            if left {
                left_score += seen;
            } else if right {
                right_score += seen;
            }
            if r.is_finite() {
                let body_dir = mount.rotation * d;
                points.push(mount.translation.vector + body_dir * *r);
                rays.push((body_dir, left));
            }
        }
        Self { points, rays, left_score, right_score }
    }

    /// Smallest along-axis distance, measured from the sensor, among points
    /// inside the motion cone or the body corridor for horizontal unit `u`.
    fn near(&self, u: &Vec3, origin: &Vec3, half_width: f64, half_height: f64, cos_cone: f64) -> f64 {
        let l = Vec3::new(-u.y, u.x, 0.0);
        let mut best = f64::INFINITY;
        for (p, (d, _)) in self.points.iter().zip(&self.rays) {
            let rel = p - origin;
            let along = rel.dot(u);
            if along <= 0.0 || (p.z).abs() > half_height {
                continue;
            }
            let horiz = Vec3::new(d.x, d.y, 0.0);
            let in_cone = horiz.norm() > 0.0 && horiz.normalize().dot(u) >= cos_cone;
            if in_cone || p.dot(&l).abs() <= half_width {
                best = best.min(along);
            }
        }
        best
    }
}

/// Geometric baseline behind the learned-policy interface. The nominal
/// command is `v_max * goal_dir`. Within `d_slow` of an obstacle in the
/// motion cone the horizontal component is scaled toward zero at `d_stop`
/// and a lateral escape toward the freer image half is added. Horizontal
/// motion the sensor cannot see is stopped while the body yaws toward it.
pub fn policy_step(state: &PartialState, depth: &RangeImage, params: &SafetyParams) -> Result<VelocityCommand, SafetyError> {
    let (rows, cols, _) = params.tof.ray_directions();
    if (depth.rows, depth.cols) != (rows, cols) || depth.ranges.len() != rows * cols {
        return Err(SafetyError::MalformedDepth { expected: (rows, cols), found: (depth.rows, depth.cols) });
    }
    let g = state.goal_dir;
    let nominal = g * params.v_max;
    let horiz = Vec3::new(nominal.x, nominal.y, 0.0);
    let vertical = Vec3::new(0.0, 0.0, nominal.z);
    let yaw_err = if horiz.norm() > 1e-9 { g.y.atan2(g.x) } else { 0.0 };
    let yaw_rate = (params.yaw_gain * yaw_err).clamp(-params.max_yaw_rate, params.max_yaw_rate);
    if horiz.norm() < 1e-9 {
        return Ok(VelocityCommand { linear: vertical, yaw_rate, provenance: Provenance::Nominal, min_depth: f64::INFINITY });
    }

    let obs = Observation::new(depth, &params.tof, 2.0 * params.d_slow);
    let origin = params.tof.mount_pose.position;
    let yaw = state.attitude[2];
    let half = params.robot.half();
    let corridor = |u: &Vec3| {
        // Support of the world-aligned box along the body lateral axis.
        let (s, c) = yaw.sin_cos();
        let l = Vec3::new(-u.y, u.x, 0.0);
        let lw = Vec3::new(c * l.x - s * l.y, s * l.x + c * l.y, 0.0);
        half.x * lw.x.abs() + half.y * lw.y.abs() + params.corridor_margin
    };
    let half_height = half.z + params.corridor_margin;
    let cos_cone = params.cone_half_angle_deg.to_radians().cos();
    let az_limit = (params.tof.azimuth_fov_deg / 2.0).to_radians();
    let observable = |u: &Vec3| u.y.atan2(u.x).abs() <= az_limit;

    let u = horiz.normalize();
    if !observable(&u) {
        return Ok(VelocityCommand { linear: vertical, yaw_rate, provenance: Provenance::Stop, min_depth: f64::NAN });
    }
    let d_near = obs.near(&u, &origin, corridor(&u), half_height, cos_cone);
    let factor = ((d_near - params.d_stop) / (params.d_slow - params.d_stop)).clamp(0.0, 1.0);
    let along = horiz * factor;
    let mut linear = along;
    if factor < 1.0 && factor > 0.0 {
        let side = if obs.left_score >= obs.right_score { 1.0 } else { -1.0 };
        let escape = Vec3::new(-u.y, u.x, 0.0) * (side * params.escape_gain * params.v_max * (1.0 - factor));
        let merged = along + escape;
        let m = merged.normalize();
        if observable(&m) && obs.near(&m, &origin, corridor(&m), half_height, cos_cone) >= params.d_stop {
            linear = merged;
        }
    }
    linear += vertical;
    if linear.norm() > params.v_max {
        linear *= params.v_max / linear.norm();
    }
    let provenance = if factor <= 0.0 {
        Provenance::Stop
    } else if factor < 1.0 {
        Provenance::SafetyClamped
    } else {
        Provenance::Nominal
    };
    Ok(VelocityCommand { linear, yaw_rate, provenance, min_depth: d_near })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{render_frame, Payload, VoxelWorld};
    use proptest::prelude::*;

    fn open_image() -> RangeImage {
        let (rows, cols, _) = SensorModel::tof().ray_directions();
        RangeImage { rows, cols, ranges: vec![f64::INFINITY; rows * cols] }
    }

    fn forward() -> PartialState {
        PartialState::new(Vec3::zeros(), [0.0; 3], Vec3::x()).unwrap()
    }

    #[test]
    fn open_space_is_nominal() {
        let c = policy_step(&forward(), &open_image(), &SafetyParams::default()).unwrap();
        assert_eq!(c.provenance, Provenance::Nominal);
        assert!((c.linear - Vec3::x()).norm() < 1e-12);
        assert_eq!(c.yaw_rate, 0.0);
    }

    fn wall_image(distance: f64) -> RangeImage {
        let mut w = VoxelWorld::new(0.1, [60, 40, 30], Pose::from_xyz_yaw(1.0, 2.0, 1.5, 0.0)).unwrap();
        let tof = SensorModel::tof();
        let x = 1.0 + tof.mount_pose.position.x + distance;
        for v in w.grid().iter().collect::<Vec<_>>() {
            if w.grid().voxel_box(v).min.x >= x - 1e-9 {
                w.set(v, true);
            }
        }
        match render_frame(&w, &Pose::from_xyz_yaw(1.0, 2.0, 1.5, 0.0), &tof).unwrap().payload {
            Payload::Depth(d) => d,
            _ => unreachable!(),
        }
    }

    #[test]
    fn wall_ahead_stops() {
        let c = policy_step(&forward(), &wall_image(0.4), &SafetyParams::default()).unwrap();
        assert_eq!(c.provenance, Provenance::Stop);
        assert!(c.linear.x.abs() < 1e-12);
        let c = policy_step(&forward(), &wall_image(1.0), &SafetyParams::default()).unwrap();
        assert_eq!(c.provenance, Provenance::SafetyClamped);
        assert!(c.linear.x > 0.0 && c.linear.x < 1.0);
    }

    #[test]
    fn unseen_direction_turns_in_place() {
        let s = PartialState::new(Vec3::zeros(), [0.0; 3], -Vec3::y()).unwrap();
        let c = policy_step(&s, &open_image(), &SafetyParams::default()).unwrap();
        assert_eq!(c.provenance, Provenance::Stop);
        assert_eq!(c.linear, Vec3::zeros());
        assert!(c.yaw_rate < 0.0);
    }

    #[test]
    fn malformed_depth_rejected() {
        let img = RangeImage { rows: 2, cols: 2, ranges: vec![1.0; 4] };
        assert!(matches!(policy_step(&forward(), &img, &SafetyParams::default()), Err(SafetyError::MalformedDepth { .. })));
        assert_eq!(PartialState::new(Vec3::zeros(), [0.0; 3], Vec3::new(2.0, 0.0, 0.0)), Err(SafetyError::InvalidGoal));
    }

    proptest! {
        #[test]
        fn safety_dominance(
            ranges in proptest::collection::vec(prop_oneof![Just(f64::INFINITY), 0.05f64..4.0], 667),
            gx in -1.0f64..1.0, gy in -1.0f64..1.0, gz in -0.3f64..0.3, yaw in -3.1f64..3.1,
        ) {
            let params = SafetyParams::default();
            let (rows, cols, dirs) = params.tof.ray_directions();
            prop_assume!(rows * cols == ranges.len());
            let g = Vec3::new(gx, gy, gz);
            prop_assume!(Vec3::new(gx, gy, 0.0).norm() > 0.05);
            let s = PartialState::new(Vec3::zeros(), [0.0, 0.0, yaw], g.normalize()).unwrap();
            let img = RangeImage { rows, cols, ranges: ranges.clone() };
            let c = policy_step(&s, &img, &params).unwrap();
            prop_assert!(c.linear.norm() <= params.v_max + 1e-12);
            // Any return closer than d_stop inside the angular cone around
            // the horizontal goal direction forbids motion along it.
            let u = Vec3::new(gx, gy, 0.0).normalize();
            let origin = params.tof.mount_pose.position;
            let half_height = params.robot.half().z + params.corridor_margin;
            let cos_cone = params.cone_half_angle_deg.to_radians().cos();
            let blocked = ranges.iter().zip(&dirs).any(|(r, d)| {
                let p = origin + d * *r;
                let h = Vec3::new(d.x, d.y, 0.0);
                r.is_finite() && (p - origin).dot(&u) > 0.0 && (p - origin).dot(&u) < params.d_stop
                    && p.z.abs() <= half_height && h.norm() > 0.0 && h.normalize().dot(&u) >= cos_cone
            });
            if blocked {
                prop_assert!(c.linear.dot(&u) <= 1e-12, "{:?}", c);
            }
        }
    }
}
