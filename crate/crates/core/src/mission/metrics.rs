use std::io::{Read, Write};

use crate::collision::RobotBox;
use crate::geometry::{Pose, Vec3};
use crate::map::{Occupancy, OccupancyMap};
use crate::safety::Provenance;
use crate::world::VoxelWorld;

use super::{MissionError, Mode};

/// One simulation tick as logged by the mission runner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub phase: Mode,
    pub truth: Pose,
    pub estimate: Pose,
    /// Carrot point the tracker steered toward.
    pub target: Vec3,
    pub velocity: Vec3,
    pub yaw_rate: f64,
    pub provenance: Provenance,
}

/// Everything metrics are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub start: Pose,
    pub ticks: Vec<TickRecord>,
    pub map: OccupancyMap,
    /// `(covered, total)` inspectable surfaces, if inspection ran.
    pub coverage: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub explored_fraction: f64,
    pub explored_free: usize,
    pub reachable_free: usize,
    pub coverage_fraction: Option<f64>,
    pub path_length: f64,
    pub duration: f64,
    pub collisions: usize,
    pub max_commanded_z: f64,
    pub final_offset: f64,
    /// Map voxels classified free that are occupied in the world.
    pub false_free: usize,
}

/// Explored fraction is mapped-free over flood-fill reachable free voxels.
/// A tick collides when the physical body box at its true position
/// overlaps an occupied world voxel.
pub fn compute_metrics(log: &MissionLog, world: &VoxelWorld) -> Metrics {
    let reachable = world.reachable_free();
    let grid = world.grid();
    let mut reachable_free = 0;
    let mut explored_free = 0;
    let mut false_free = 0;
    for (i, &r) in reachable.iter().enumerate() {
        let v = grid.from_linear(i);
        let free = log.map.classify(v) == Occupancy::Free;
        if r {
            reachable_free += 1;
            explored_free += free as usize;
        }
        if free && world.is_occupied(v) {
            false_free += 1;
        }
    }
    let body = RobotBox::physical();
    let mut prev = log.start.position;
    let mut path_length = 0.0;
    let mut collisions = 0;
    let mut max_commanded_z = f64::NEG_INFINITY;
    for t in &log.ticks {
        path_length += (t.truth.position - prev).norm();
        prev = t.truth.position;
        collisions += world.box_collides(&body.at(&t.truth.position)) as usize;
        max_commanded_z = max_commanded_z.max(t.target.z);
    }
    if log.ticks.is_empty() {
        max_commanded_z = log.start.position.z;
    }
    Metrics {
        explored_fraction: if reachable_free > 0 { explored_free as f64 / reachable_free as f64 } else { 1.0 },
        explored_free,
        reachable_free,
        coverage_fraction: log.coverage.map(|(c, n)| if n > 0 { c as f64 / n as f64 } else { 1.0 }),
        path_length,
        duration: log.ticks.last().map_or(0.0, |t| t.t),
        collisions,
        max_commanded_z,
        final_offset: (prev - log.start.position).norm(),
        false_free,
    }
}

const HEADER: [&str; 18] = [
    "t", "phase", "x", "y", "z", "yaw", "est_x", "est_y", "est_z", "est_yaw", "target_x", "target_y", "target_z", "vx",
    "vy", "vz", "yaw_rate", "provenance",
];

/// Writes the tick log, one row per tick.
pub fn write_trajectory_csv<W: Write>(out: W, ticks: &[TickRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in ticks {
        let (p, e, g, v) = (r.truth.position, r.estimate.position, r.target, r.velocity);
        let mut row = vec![format!("{:.3}", r.t), r.phase.name().to_string()];
        row.extend([p.x, p.y, p.z, r.truth.yaw, e.x, e.y, e.z, r.estimate.yaw].map(|x| format!("{x:.6}")));
        row.extend([g.x, g.y, g.z, v.x, v.y, v.z, r.yaw_rate].map(|x| format!("{x:.6}")));
        row.push(r.provenance.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush()
}

/// Reads a log written by [`write_trajectory_csv`].
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TickRecord>, MissionError> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |line: usize, m: String| MissionError::Log(format!("trajectory line {line}: {m}"));
    let header = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut ticks = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let num = |i: usize| -> Result<f64, MissionError> {
            rec[i].parse::<f64>().map_err(|e| bad(line, format!("{}: {e}", HEADER[i])))
        };
        let provenance = match &rec[17] {
            "nominal" => Provenance::Nominal,
            "safety_clamped" => Provenance::SafetyClamped,
            "stop" => Provenance::Stop,
            other => return Err(bad(line, format!("provenance `{other}`"))),
        };
        ticks.push(TickRecord {
            t: num(0)?,
            phase: rec[1].parse().map_err(|e: MissionError| bad(line, e.to_string()))?,
            truth: Pose::from_xyz_yaw(num(2)?, num(3)?, num(4)?, num(5)?),
            estimate: Pose::from_xyz_yaw(num(6)?, num(7)?, num(8)?, num(9)?),
            target: Vec3::new(num(10)?, num(11)?, num(12)?),
            velocity: Vec3::new(num(13)?, num(14)?, num(15)?),
            yaw_rate: num(16)?,
            provenance,
        });
    }
    Ok(ticks)
}
