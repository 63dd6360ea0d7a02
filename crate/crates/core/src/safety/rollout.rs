use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::collision::{segment_collides_world, RobotBox};
use crate::geometry::{wrap_angle, Aabb, Pose, Vec3};
use crate::graph::Path;
use crate::inspect::{connect_and_tour, TourParams};
use crate::map::{MapParams, OccupancyMap};
use crate::world::{render_frame, Payload, VoxelWorld};

use super::drift::{DriftModel, DriftState};
use super::track::{track_path, TrackOutput, TrackParams};
use super::{policy_step, PartialState, Provenance, SafetyError, SafetyParams, VelocityCommand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutParams {
    pub dt: f64,
    /// First-order velocity response time constant.
    pub tau: f64,
    pub max_time: f64,
    pub goal_tolerance: f64,
    /// Route commands through [`policy_step`]; otherwise track raw.
    pub filter: bool,
    pub drift: DriftModel,
    pub track: TrackParams,
    pub safety: SafetyParams,
    /// Body used for the collision oracle.
    pub robot: RobotBox,
}

impl Default for RolloutParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            tau: 0.15,
            max_time: 120.0,
            goal_tolerance: 0.5,
            filter: true,
            drift: DriftModel::none(),
            track: TrackParams::default(),
            safety: SafetyParams::default(),
            robot: RobotBox::physical(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutRow {
    pub t: f64,
    pub truth: Pose,
    pub estimate: Pose,
    pub command: VelocityCommand,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub row: RolloutRow,
    pub track: TrackOutput,
    pub finished: bool,
}

/// True and estimated state of a velocity-controlled body.
#[derive(Debug, Clone)]
pub struct Navigator {
    pub pose: Pose,
    /// World-frame velocity.
    pub velocity: Vec3,
    pub t: f64,
    pub travelled: f64,
    drift: DriftState,
    hint: f64,
}

impl Navigator {
    pub fn new(start: Pose, drift: DriftModel) -> Self {
        Self { pose: start, velocity: Vec3::zeros(), t: 0.0, travelled: 0.0, drift: DriftState::new(drift), hint: 0.0 }
    }

    pub fn estimate(&self) -> Pose {
        self.drift.estimate(&self.pose)
    }

    /// Starts tracking a new path from its beginning.
    pub fn reset_path(&mut self) {
        self.hint = 0.0;
    }

    /// One sense-decide-act tick along `path`.
    pub fn step(&mut self, world: &VoxelWorld, path: &Path, params: &RolloutParams) -> Result<StepOutcome, SafetyError> {
        let est = self.estimate();
        let track = track_path(path, &est, &params.track, self.hint)?;
        self.hint = track.progress;
        let command = if track.finished {
            VelocityCommand { linear: Vec3::zeros(), yaw_rate: 0.0, provenance: Provenance::Nominal, min_depth: f64::NAN }
        } else {
            let state = PartialState::from_world(&est, &self.velocity, &track.goal_dir)?;
            let safety = SafetyParams { v_max: track.speed, ..params.safety.clone() };
            if params.filter {
                let frame = render_frame(world, &self.pose, &safety.tof).expect("ToF is exteroceptive");
                let Payload::Depth(depth) = frame.payload else { unreachable!("ToF yields depth") };
                policy_step(&state, &depth, &safety)?
            } else {
                let g = state.goal_dir;
                let yaw_err = if g.x.hypot(g.y) > 1e-9 { g.y.atan2(g.x) } else { 0.0 };
                VelocityCommand {
                    linear: g * track.speed,
                    yaw_rate: (safety.yaw_gain * yaw_err).clamp(-safety.max_yaw_rate, safety.max_yaw_rate),
                    provenance: Provenance::Nominal,
                    min_depth: f64::NAN,
                }
            }
        };
        let (s, c) = self.pose.yaw.sin_cos();
        let l = command.linear;
        let cmd_world = Vec3::new(c * l.x - s * l.y, s * l.x + c * l.y, l.z);
        let alpha = (params.dt / params.tau).min(1.0);
        self.velocity += (cmd_world - self.velocity) * alpha;
        let from = self.pose.position;
        let to = from + self.velocity * params.dt;
        let collided = segment_collides_world(world, &params.robot, &from, &to);
        self.pose.position = to;
        self.pose.yaw = wrap_angle(self.pose.yaw + command.yaw_rate * params.dt);
        let step = (to - from).norm();
        self.travelled += step;
        self.drift.advance(step, &self.pose);
        self.t += params.dt;
        let row = RolloutRow { t: self.t, truth: self.pose, estimate: self.estimate(), command, collided };
        Ok(StepOutcome { row, track, finished: track.finished })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub rows: Vec<RolloutRow>,
    /// Ticks whose swept body met an occupied voxel.
    pub collisions: usize,
    /// The tracker reached the end of the path.
    pub finished: bool,
    /// The true position ended within the goal tolerance.
    pub reached: bool,
    pub replan_requested: bool,
}

/// Closed-loop run along `path` from its first waypoint until the tracker
/// finishes, requests a replan, or time runs out.
pub fn rollout(world: &VoxelWorld, path: &Path, goal: &Vec3, params: &RolloutParams) -> RolloutResult {
    let start = path.first().map(|v| Pose::new(v.position, v.yaw)).unwrap_or(*world.start_pose());
    let mut nav = Navigator::new(start, params.drift);
    let mut rows = Vec::new();
    let mut finished = false;
    let mut replan_requested = false;
    while nav.t < params.max_time {
        match nav.step(world, path, params) {
            Ok(o) => {
                rows.push(o.row);
                if o.finished {
                    finished = true;
                    break;
                }
            }
            Err(_) => {
                replan_requested = true;
                break;
            }
        }
    }
    let collisions = rows.iter().filter(|r| r.collided).count();
    let reached = (nav.pose.position - goal).norm() <= params.goal_tolerance;
    RolloutResult { rows, collisions, finished, reached, replan_requested }
}

/// `t,x,y,z,yaw,est_x,est_y,est_z,est_yaw,vx,vy,vz,yaw_rate,provenance,min_depth`.
pub fn write_rollout_csv<W: Write>(mut out: W, rows: &[RolloutRow]) -> std::io::Result<()> {
    writeln!(out, "t,x,y,z,yaw,est_x,est_y,est_z,est_yaw,vx,vy,vz,yaw_rate,provenance,min_depth")?;
    for r in rows {
        let (p, e, c) = (r.truth.position, r.estimate.position, r.command.linear);
        writeln!(
            out,
            "{:.3},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{:.4}",
            r.t,
            p.x,
            p.y,
            p.z,
            r.truth.yaw,
            e.x,
            e.y,
            e.z,
            r.estimate.yaw,
            c.x,
            c.y,
            c.z,
            r.command.yaw_rate,
            r.command.provenance.as_str(),
            r.command.min_depth
        )?;
    }
    Ok(())
}

/// Roadmap path from `start` to `goal` on the true map, planned with a box
/// inflated well beyond the body so tracking error stays clear of walls.
pub fn clear_path(world: &VoxelWorld, start: &Pose, goal: &Vec3, clearance: RobotBox, seed: u64) -> Option<Path> {
    let map = OccupancyMap::from_ground_truth(world, MapParams::default()).ok()?;
    let params = TourParams { robot: clearance, seed, ..TourParams::default() };
    let tour = connect_and_tour(&[Pose::new(*goal, 0.0)], start, &map, &params);
    tour.unreachable.is_empty().then_some(tour.path)
}

/// Drift under which raw tracking of [`adversarial_corridor`] hits a wall.
pub const ADVERSARIAL_DRIFT: DriftModel = DriftModel { rate: 0.05, seed: 5 };

/// Straight 1.2 m wide corridor with a path down its centre line. Under
/// 5 cm/m drift the raw tracker follows the estimate into a wall.
pub fn adversarial_corridor() -> (VoxelWorld, Path) {
    let res = 0.1;
    let extents = [260, 16, 22];
    let start = Pose::from_xyz_yaw(1.0, 0.8 + 0.0031, 1.1 + 0.0017, 0.0);
    let mut world = VoxelWorld::new(res, extents, start).expect("valid corridor");
    for y_wall in [Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(26.0, 0.2, 2.2)), Aabb::new(Vec3::new(0.0, 1.4, 0.0), Vec3::new(26.0, 1.6, 2.2))]
    {
        world.fill_box(&y_wall, true);
    }
    let path = Path::from_points(&[start.position, Vec3::new(25.0, start.position.y, start.position.z)]);
    (world, path)
}
