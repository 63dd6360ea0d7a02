use serde::{Deserialize, Serialize};

use crate::geometry::{for_each_in_range, Aabb, Pose, Vec3, VoxelIndex, VoxelTraversal};
use crate::map::{Occupancy, OccupancyMap};
use crate::world::SensorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainParams {
    /// Frustum and mount of the mapping sensor.
    pub sensor: SensorModel,
    /// Only voxels whose centers lie within this distance count.
    pub range: f64,
}

impl Default for GainParams {
    fn default() -> Self {
        Self { sensor: SensorModel::lidar(), range: 3.0 }
    }
}

/// Unknown voxels with centers inside the sensor frustum and range whose
/// sight line from the sensor origin crosses no occupied voxel. Unknown
/// voxels do not block. Sorted in lattice order.
pub fn visible_unknown(map: &OccupancyMap, pose: &Pose, params: &GainParams) -> Vec<VoxelIndex> {
    let grid = map.grid();
    let iso = pose.compose(&params.sensor.mount_pose);
    let origin = iso.translation.vector;
    let inv = iso.rotation.inverse();
    let cube = Aabb::centered(origin, Vec3::repeat(2.0 * params.range));
    let Some((lo, hi)) = grid.index_range(&cube) else {
        return Vec::new();
    };
    let origin_voxel = grid.voxel_of(&origin);
    let r2 = params.range * params.range;
    let mut out = Vec::new();
    for_each_in_range(lo, hi, |v| {
        if v == origin_voxel || map.classify(v) != Occupancy::Unknown {
            return;
        }
        let c = grid.center(v);
        let d = c - origin;
        if d.norm_squared() > r2 || !params.sensor.in_fov(&(inv * d)) {
            return;
        }
        if line_of_sight(map, &origin, &c, v) {
            out.push(v);
        }
    });
    out
}

fn line_of_sight(map: &OccupancyMap, origin: &Vec3, target: &Vec3, target_voxel: VoxelIndex) -> bool {
    let d = target - origin;
    let len = d.norm();
    for (u, _) in VoxelTraversal::new(map.grid(), origin, &(d / len), len) {
        if u == target_voxel {
            return true;
        }
        if map.is_occupied(u) {
            return false;
        }
    }
    true
}

/// Count of [`visible_unknown`] voxels.
pub fn exploration_gain(map: &OccupancyMap, pose: &Pose, params: &GainParams) -> f64 {
    visible_unknown(map, pose, params).len() as f64
}
