use crate::geometry::{Grid, Vec3, VoxelIndex, FACE_OFFSETS};
use crate::map::OccupancyMap;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceVoxel {
    pub index: VoxelIndex,
    pub center: Vec3,
    /// Unit outward normal.
    pub normal: Vec3,
    /// Free space on opposing sides, so a single normal is not meaningful.
    pub multi_normal: bool,
    /// Indices into [`FACE_OFFSETS`] of the free face neighbours.
    pub free_faces: Vec<usize>,
}

impl SurfaceVoxel {
    pub fn face_direction(face: usize) -> Vec3 {
        let [x, y, z] = FACE_OFFSETS[face];
        Vec3::new(x as f64, y as f64, z as f64)
    }
}

/// Occupied map voxels that touch free space through a face.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    pub voxels: Vec<SurfaceVoxel>,
    grid: Grid,
    ids: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl SurfaceSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, id: usize) -> &SurfaceVoxel {
        &self.voxels[id]
    }

    pub fn id_of(&self, v: VoxelIndex) -> Option<usize> {
        if !self.grid.contains(v) {
            return None;
        }
        let id = self.ids[self.grid.linear(v)];
        (id != NONE).then_some(id as usize)
    }
}

/// Surface voxels in lattice order. Normals point toward the centroid of
/// free voxels in the surrounding 3x3x3 block.
pub fn extract_surfaces(map: &OccupancyMap) -> SurfaceSet {
    let grid = *map.grid();
    let mut ids = vec![NONE; grid.len()];
    let mut voxels = Vec::new();
    for v in map.known_voxels() {
        if !map.is_occupied(v) {
            continue;
        }
        let free_faces: Vec<usize> =
            (0..6).filter(|&f| map.is_free(v.offset(FACE_OFFSETS[f][0], FACE_OFFSETS[f][1], FACE_OFFSETS[f][2]))).collect();
        if free_faces.is_empty() {
            continue;
        }
        let mut sum = Vec3::zeros();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dx, dy, dz) != (0, 0, 0) && map.is_free(v.offset(dx, dy, dz)) {
                        sum += Vec3::new(dx as f64, dy as f64, dz as f64);
                    }
                }
            }
        }
        let opposed = free_faces.iter().any(|&f| free_faces.contains(&(f ^ 1)));
        let (normal, multi_normal) = if sum.norm() < 1e-9 {
            (SurfaceVoxel::face_direction(free_faces[0]), true)
        } else {
            (sum.normalize(), opposed)
        };
        ids[grid.linear(v)] = voxels.len() as u32;
        voxels.push(SurfaceVoxel { index: v, center: grid.center(v), normal, multi_normal, free_faces });
    }
    SurfaceSet { voxels, grid, ids }
}
