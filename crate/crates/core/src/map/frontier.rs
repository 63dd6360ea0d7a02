use crate::geometry::{for_each_in_range, Aabb, VoxelIndex};

use super::{OccupancyMap, Occupancy};

/// Free voxels inside `region` with at least one 6-neighbour that is
/// unknown. Neighbours off the lattice do not count. Sorted in lattice order.
pub fn extract_frontiers(map: &OccupancyMap, region: &Aabb) -> Vec<VoxelIndex> {
    let grid = map.grid();
    let Some((lo, hi)) = grid.index_range(region) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for_each_in_range(lo, hi, |v| {
        if map.is_free(v)
            && v.face_neighbors()
                .iter()
                .any(|n| grid.contains(*n) && map.classify(*n) == Occupancy::Unknown)
        {
            out.push(v);
        }
    });
    out.sort_unstable_by_key(|v| grid.linear(*v));
    out
}
