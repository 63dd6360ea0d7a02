//! Swept axis-aligned robot boxes against the occupancy map.

use serde::{Deserialize, Serialize};

use crate::geometry::{for_each_in_range, Aabb, Vec3};
use crate::map::OccupancyMap;
use crate::world::VoxelWorld;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotBox {
    pub size: Vec3,
}

impl RobotBox {
    /// Planning box: platform dimensions plus margin.
    pub fn planning() -> Self {
        Self { size: Vec3::new(0.6, 0.6, 0.35) }
    }

    /// Physical platform dimensions.
    pub fn physical() -> Self {
        Self { size: Vec3::new(0.52, 0.52, 0.24) }
    }

    pub fn half(&self) -> Vec3 {
        self.size / 2.0
    }

    pub fn at(&self, center: &Vec3) -> Aabb {
        Aabb::centered(*center, self.size)
    }
}

/// True when the box is free at `p` against the map: every voxel it
/// overlaps must be known free.
pub fn pose_is_free(map: &OccupancyMap, robot: &RobotBox, p: &Vec3) -> bool {
    map.box_is_free(&robot.at(p))
}

/// True when the box swept from `a` to `b` overlaps only free voxels.
pub fn segment_is_free(map: &OccupancyMap, robot: &RobotBox, a: &Vec3, b: &Vec3) -> bool {
    let half = robot.half();
    let sweep = Aabb::new(a.inf(b), a.sup(b)).expanded(&half);
    let grid = map.grid();
    let inside = grid.bounds();
    if (0..3).any(|i| sweep.min[i] < inside.min[i] || sweep.max[i] > inside.max[i]) {
        return false;
    }
    let Some((lo, hi)) = grid.index_range(&sweep) else {
        return false;
    };
    let mut ok = true;
    for_each_in_range(lo, hi, |v| {
        if ok && !map.is_free(v) && swept_overlaps(&grid.voxel_box(v), &half, a, b) {
            ok = false;
        }
    });
    ok
}

/// Same test against ground truth, for collision accounting.
pub fn segment_collides_world(world: &VoxelWorld, robot: &RobotBox, a: &Vec3, b: &Vec3) -> bool {
    let half = robot.half();
    let sweep = Aabb::new(a.inf(b), a.sup(b)).expanded(&half);
    let grid = world.grid();
    let inside = grid.bounds();
    if (0..3).any(|i| sweep.min[i] < inside.min[i] || sweep.max[i] > inside.max[i]) {
        return true;
    }
    let Some((lo, hi)) = grid.index_range(&sweep) else {
        return true;
    };
    let mut hit = false;
    for_each_in_range(lo, hi, |v| {
        if !hit && world.is_occupied(v) && swept_overlaps(&grid.voxel_box(v), &half, a, b) {
            hit = true;
        }
    });
    hit
}

/// Open box of half-size `half` moving along `a -> b` overlaps `voxel`
/// iff the segment meets the voxel grown by `half` in its interior.
fn swept_overlaps(voxel: &Aabb, half: &Vec3, a: &Vec3, b: &Vec3) -> bool {
    let grown = voxel.expanded(half);
    match grown.segment_clip(a, b) {
        None => false,
        Some((t0, t1)) => {
            // Reject grazing contact along a face.
            let m = a + (b - a) * ((t0 + t1) / 2.0);
            (0..3).all(|i| m[i] > grown.min[i] && m[i] < grown.max[i])
        }
    }
}
