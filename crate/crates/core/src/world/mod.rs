//! Ground-truth voxel world, scenario generators and simulated exteroceptive
//! sensors. The world is immutable once built and is the oracle every other
//! subsystem is scored against.

mod scenario;
mod sensors;
mod snapshot;

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{Aabb, Grid, Pose, Vec3, VoxelIndex, VoxelTraversal};

pub use scenario::{build_scenario, Generator, ScenarioDescriptor};
pub use sensors::{
    render_frame, render_frame_noisy, sensor_rays, InertialSample, Payload, RangeImage,
    SensorFrame, SensorKind, SensorModel, MIN_RANGE, NO_RETURN,
};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("extents must be at least {min} voxels per axis, got {extents:?}")]
    InvalidExtents { extents: [usize; 3], min: usize },
    #[error("unknown scenario generator `{0}`")]
    UnknownGenerator(String),
    #[error("start pose {0:?} lies in an occupied voxel")]
    StartOccupied(Vec3),
    #[error("scenario descriptor line {line}: {message}")]
    Descriptor { line: usize, message: String },
    #[error("ray direction must be unit length (|dir| = {0})")]
    NonUnitDirection(f64),
    #[error("ray origin {0:?} outside world bounds")]
    OriginOutside(Vec3),
    #[error("sensor `{0}` is not exteroceptive")]
    NotExteroceptive(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of casting one ray through the ground-truth world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayHit {
    /// Distance along the ray to the entry face of the first occupied voxel.
    Hit { distance: f64, voxel: VoxelIndex },
    NoReturn,
    /// Origin sits inside an occupied voxel.
    Embedded,
}

impl RayHit {
    pub fn distance(&self) -> Option<f64> {
        match self {
            RayHit::Hit { distance, .. } => Some(*distance),
            _ => None,
        }
    }

    pub fn voxel(&self) -> Option<VoxelIndex> {
        match self {
            RayHit::Hit { voxel, .. } => Some(*voxel),
            _ => None,
        }
    }
}

/// Dense boolean occupancy lattice. Voxels outside the lattice, and the
/// outermost layer of it, are occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelWorld {
    grid: Grid,
    occupancy: Vec<bool>,
    start_pose: Pose,
    goal: Option<Vec3>,
}

impl VoxelWorld {
    /// An empty world with only its boundary layer occupied.
    pub fn new(resolution: f64, extents: [usize; 3], start_pose: Pose) -> Result<Self, WorldError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(WorldError::InvalidResolution(resolution));
        }
        if extents.iter().any(|&e| e < 1) {
            return Err(WorldError::InvalidExtents { extents, min: 1 });
        }
        let grid = Grid::new(Vec3::zeros(), resolution, extents);
        let mut world =
            Self { grid, occupancy: vec![false; grid.len()], start_pose, goal: None };
        world.seal_boundary();
        world.check_start()?;
        Ok(world)
    }

    /// Builds a world from raw parts, re-sealing the boundary.
    pub fn from_parts(
        grid: Grid,
        occupancy: Vec<bool>,
        start_pose: Pose,
        goal: Option<Vec3>,
    ) -> Result<Self, WorldError> {
        if !(grid.resolution > 0.0) {
            return Err(WorldError::InvalidResolution(grid.resolution));
        }
        if grid.extents.iter().any(|&e| e < 1) || occupancy.len() != grid.len() {
            return Err(WorldError::InvalidExtents { extents: grid.extents, min: 1 });
        }
        let mut world = Self { grid, occupancy, start_pose, goal };
        world.seal_boundary();
        world.check_start()?;
        Ok(world)
    }

    fn seal_boundary(&mut self) {
        let [nx, ny, nz] = self.grid.extents;
        for i in 0..self.grid.len() {
            let v = self.grid.from_linear(i);
            let (x, y, z) = (v.x as usize, v.y as usize, v.z as usize);
            if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
                self.occupancy[i] = true;
            }
        }
    }

    pub(crate) fn check_start(&self) -> Result<(), WorldError> {
        if self.is_occupied(self.grid.voxel_of(&self.start_pose.position)) {
            Err(WorldError::StartOccupied(self.start_pose.position))
        } else {
            Ok(())
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution
    }

    pub fn extents(&self) -> [usize; 3] {
        self.grid.extents
    }

    pub fn start_pose(&self) -> &Pose {
        &self.start_pose
    }

    /// Navigation goal declared by the generator, if any.
    pub fn goal(&self) -> Option<Vec3> {
        self.goal
    }

    pub(crate) fn set_goal(&mut self, goal: Option<Vec3>) {
        self.goal = goal;
    }

    pub(crate) fn set_start_pose(&mut self, pose: Pose) {
        self.start_pose = pose;
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        !self.grid.contains(v) || self.occupancy[self.grid.linear(v)]
    }

    pub fn is_occupied_at(&self, p: &Vec3) -> bool {
        self.is_occupied(self.grid.voxel_of(p))
    }

    pub(crate) fn set(&mut self, v: VoxelIndex, occupied: bool) {
        if self.grid.contains(v) {
            let i = self.grid.linear(v);
            self.occupancy[i] = occupied;
        }
    }

    /// Sets every voxel whose center lies in `b`.
    pub(crate) fn fill_box(&mut self, b: &Aabb, occupied: bool) {
        if let Some((lo, hi)) = self.grid.index_range(b) {
            crate::geometry::for_each_in_range(lo, hi, |v| {
                if b.contains(&self.grid.center(v)) {
                    self.set(v, occupied);
                }
            });
        }
    }

    pub(crate) fn seal(&mut self) {
        self.seal_boundary();
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    /// True when the open box overlaps any occupied voxel.
    pub fn box_collides(&self, b: &Aabb) -> bool {
        let Some((lo, hi)) = self.grid.index_range(b) else {
            return true;
        };
        let inside = self.grid.bounds();
        if (0..3).any(|i| b.min[i] < inside.min[i] || b.max[i] > inside.max[i]) {
            return true;
        }
        let mut hit = false;
        crate::geometry::for_each_in_range(lo, hi, |v| {
            if !hit && self.is_occupied(v) && self.grid.voxel_box(v).overlaps(b) {
                hit = true;
            }
        });
        hit
    }

    /// Exact ray cast against the occupancy lattice.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Result<RayHit, WorldError> {
        let norm = dir.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(WorldError::NonUnitDirection(norm));
        }
        if !self.grid.bounds().contains(origin) {
            return Err(WorldError::OriginOutside(*origin));
        }
        Ok(self.cast_unchecked(origin, dir, max_range))
    }

    pub(crate) fn cast_unchecked(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> RayHit {
        let mut first = true;
        for (v, t) in VoxelTraversal::new(&self.grid, origin, dir, max_range) {
            if self.is_occupied(v) {
                if first {
                    return RayHit::Embedded;
                }
                return RayHit::Hit { distance: t, voxel: v };
            }
            first = false;
        }
        RayHit::NoReturn
    }

    /// Free voxels 6-connected to the start voxel, as a dense mask.
    pub fn reachable_free(&self) -> Vec<bool> {
        self.flood_fill_from(self.grid.voxel_of(&self.start_pose.position))
    }

    pub fn flood_fill_from(&self, seed: VoxelIndex) -> Vec<bool> {
        let mut seen = vec![false; self.grid.len()];
        if self.is_occupied(seed) {
            return seen;
        }
        let mut queue = VecDeque::new();
        seen[self.grid.linear(seed)] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            for n in v.face_neighbors() {
                if !self.is_occupied(n) {
                    let i = self.grid.linear(n);
                    if !seen[i] {
                        seen[i] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> VoxelWorld {
        VoxelWorld::new(0.2, [50, 50, 15], Pose::from_xyz_yaw(5.05, 5.03, 1.01, 0.0)).unwrap()
    }

    #[test]
    fn empty_room_only_boundary() {
        let w = room();
        let interior = 48 * 48 * 13;
        assert_eq!(w.occupied_count(), 50 * 50 * 15 - interior);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            VoxelWorld::new(0.0, [5, 5, 5], Pose::identity()),
            Err(WorldError::InvalidResolution(_))
        ));
        assert!(matches!(
            VoxelWorld::new(0.2, [0, 5, 5], Pose::identity()),
            Err(WorldError::InvalidExtents { .. })
        ));
        // Origin voxel is on the boundary layer.
        assert!(matches!(
            VoxelWorld::new(0.2, [5, 5, 5], Pose::identity()),
            Err(WorldError::StartOccupied(_))
        ));
    }

    #[test]
    fn raycast_short_range_no_return() {
        let w = room();
        let o = w.start_pose().position;
        for d in [Vec3::x(), -Vec3::y(), Vec3::new(1.0, 1.0, 1.0).normalize()] {
            assert_eq!(w.raycast(&o, &d, 1.0).unwrap(), RayHit::NoReturn);
        }
    }

    #[test]
    fn raycast_wall_distance() {
        let mut w = room();
        // Wall whose near face sits at x = 8.0.
        w.fill_box(&Aabb::new(Vec3::new(8.0, 0.0, 0.0), Vec3::new(8.2, 10.0, 3.0)), true);
        let o = Vec3::new(3.0, 5.03, 1.01);
        let hit = w.raycast(&o, &Vec3::x(), 20.0).unwrap();
        let d = hit.distance().unwrap();
        assert!((d - 5.0).abs() <= 0.1, "distance {d}");
        assert_eq!(hit.voxel().unwrap().x, 40);
    }

    #[test]
    fn raycast_embedded_and_errors() {
        let w = room();
        let inside_wall = Vec3::new(0.1, 5.0, 1.0);
        assert_eq!(w.raycast(&inside_wall, &Vec3::x(), 5.0).unwrap(), RayHit::Embedded);
        assert!(matches!(
            w.raycast(&Vec3::new(5.0, 5.0, 1.0), &Vec3::new(2.0, 0.0, 0.0), 5.0),
            Err(WorldError::NonUnitDirection(_))
        ));
        assert!(matches!(
            w.raycast(&Vec3::new(-1.0, 5.0, 1.0), &Vec3::x(), 5.0),
            Err(WorldError::OriginOutside(_))
        ));
    }

    #[test]
    fn box_collision() {
        let w = room();
        let c = w.start_pose().position;
        assert!(!w.box_collides(&Aabb::centered(c, Vec3::new(0.52, 0.52, 0.24))));
        assert!(w.box_collides(&Aabb::centered(Vec3::new(0.25, 5.0, 1.0), Vec3::repeat(0.2))));
    }

    #[test]
    fn flood_fill_covers_interior() {
        let w = room();
        let n = w.reachable_free().iter().filter(|r| **r).count();
        assert_eq!(n, 48 * 48 * 13);
    }
}
