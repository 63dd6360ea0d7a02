use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};
use crate::graph::Path;

use super::SafetyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackParams {
    pub lookahead: f64,
    pub v_max: f64,
    pub recovery_radius: f64,
    /// Speed ramps down linearly over this final stretch.
    pub taper_distance: f64,
    pub arrive_tolerance: f64,
    pub min_speed: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            lookahead: 0.25,
            v_max: 1.0,
            recovery_radius: 1.0,
            taper_distance: 0.8,
            arrive_tolerance: 0.05,
            min_speed: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    /// World-frame unit vector toward the carrot point.
    pub goal_dir: Vec3,
    pub speed: f64,
    /// Arc length of the closest path point.
    pub progress: f64,
    pub deviation: f64,
    pub target: Vec3,
    pub finished: bool,
}

fn closest_on_segment(a: &Vec3, b: &Vec3, p: &Vec3) -> (f64, Vec3) {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (t, a + d * t)
}

/// Pure pursuit. `hint` is the progress returned on the previous call; the
/// closest point is searched only a short way behind and ahead of it so
/// self-crossing paths are followed in order.
pub fn track_path(path: &Path, pose: &Pose, params: &TrackParams, hint: f64) -> Result<TrackOutput, SafetyError> {
    let pts: Vec<Vec3> = path.waypoints.iter().map(|w| w.position).collect();
    let Some(last) = pts.last().copied() else { return Err(SafetyError::EmptyPath) };
    let p = pose.position;
    let mut arc = vec![0.0];
    for w in pts.windows(2) {
        arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *arc.last().unwrap();

    let window = (2.0 * params.lookahead).max(1.0) + params.recovery_radius;
    let mut best = (f64::INFINITY, hint.min(total), pts[0]);
    if pts.len() == 1 {
        best = ((p - pts[0]).norm(), 0.0, pts[0]);
    }
    for i in 0..pts.len().saturating_sub(1) {
        if arc[i + 1] < hint - 0.3 || arc[i] > hint + window {
            continue;
        }
        let (t, q) = closest_on_segment(&pts[i], &pts[i + 1], &p);
        let d = (p - q).norm();
        if d < best.0 - 1e-12 {
            best = (d, arc[i] + t * (arc[i + 1] - arc[i]), q);
        }
    }
    let (deviation, s, _) = best;
    if deviation > params.recovery_radius {
        return Err(SafetyError::ReplanRequest { deviation });
    }
    let progress = s.max(hint.min(total));
    let target = point_at(&pts, &arc, (progress + params.lookahead).min(total));
    let to_end = (last - p).norm();
    let remaining = (total - progress).max(if total - progress < params.lookahead { to_end } else { 0.0 });
    let fallback = if pts.len() >= 2 { pts[pts.len() - 1] - pts[pts.len() - 2] } else { Vec3::x() };
    let aim = if (target - p).norm() > 1e-9 { target - p } else { fallback };
    let goal_dir = if aim.norm() > 1e-12 { aim.normalize() } else { Vec3::x() };
    if total - progress <= params.lookahead && to_end <= params.arrive_tolerance {
        return Ok(TrackOutput { goal_dir, speed: 0.0, progress: total, deviation, target: last, finished: true });
    }
    let speed = (params.v_max * (remaining / params.taper_distance).min(1.0)).max(params.min_speed).min(params.v_max);
    Ok(TrackOutput { goal_dir, speed, progress, deviation, target, finished: false })
}

fn point_at(pts: &[Vec3], arc: &[f64], s: f64) -> Vec3 {
    for i in 0..pts.len().saturating_sub(1) {
        if s <= arc[i + 1] {
            let len = arc[i + 1] - arc[i];
            let t = if len > 0.0 { (s - arc[i]) / len } else { 0.0 };
            return pts[i] + (pts[i + 1] - pts[i]) * t;
        }
    }
    *pts.last().unwrap()
}
