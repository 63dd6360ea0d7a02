//! Shared geometric primitives: poses, voxel grids, boxes and the exact
//! grid traversal used by both the ground-truth world and the online map.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Rigid pose expressed as a position plus Z-Y-X Euler angles (yaw, pitch, roll).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { position: Vec3::zeros(), roll: 0.0, pitch: 0.0, yaw: 0.0 }
    }

    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, roll: 0.0, pitch: 0.0, yaw }
    }

    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new(Vec3::new(x, y, z), yaw)
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.rotation())
    }

    /// `self ∘ child`: the pose of `child` (given in this pose's frame) in the parent frame.
    pub fn compose(&self, child: &Pose) -> Isometry3<f64> {
        self.isometry() * child.isometry()
    }
}

/// Integer voxel coordinate. Ordered lexicographically (x, y, z) so that sets
/// of voxels iterate deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelIndex {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn face_neighbors(&self) -> [VoxelIndex; 6] {
        FACE_OFFSETS.map(|[dx, dy, dz]| self.offset(dx, dy, dz))
    }

    pub fn axis(&self, axis: usize) -> i32 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

pub const FACE_OFFSETS: [[i32; 3]; 6] =
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// Regular voxel lattice placement. Voxel `(i, j, k)` spans
/// `origin + [i, i+1) * resolution` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec3,
    pub resolution: f64,
    pub extents: [usize; 3],
}

impl Grid {
    pub fn new(origin: Vec3, resolution: f64, extents: [usize; 3]) -> Self {
        Self { origin, resolution, extents }
    }

    pub fn len(&self) -> usize {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.x >= 0
            && v.y >= 0
            && v.z >= 0
            && (v.x as usize) < self.extents[0]
            && (v.y as usize) < self.extents[1]
            && (v.z as usize) < self.extents[2]
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.contains(self.voxel_of(p))
    }

    pub fn voxel_of(&self, p: &Vec3) -> VoxelIndex {
        let r = (p - self.origin) / self.resolution;
        VoxelIndex::new(r.x.floor() as i32, r.y.floor() as i32, r.z.floor() as i32)
    }

    pub fn center(&self, v: VoxelIndex) -> Vec3 {
        self.origin
            + Vec3::new(v.x as f64 + 0.5, v.y as f64 + 0.5, v.z as f64 + 0.5) * self.resolution
    }

    pub fn voxel_box(&self, v: VoxelIndex) -> Aabb {
        let min = self.origin + Vec3::new(v.x as f64, v.y as f64, v.z as f64) * self.resolution;
        Aabb::new(min, min + Vec3::repeat(self.resolution))
    }

    /// Row-major linear index (x fastest). Caller guarantees `contains(v)`.
    pub fn linear(&self, v: VoxelIndex) -> usize {
        (v.z as usize * self.extents[1] + v.y as usize) * self.extents[0] + v.x as usize
    }

    pub fn from_linear(&self, i: usize) -> VoxelIndex {
        let x = i % self.extents[0];
        let y = (i / self.extents[0]) % self.extents[1];
        let z = i / (self.extents[0] * self.extents[1]);
        VoxelIndex::new(x as i32, y as i32, z as i32)
    }

    pub fn bounds(&self) -> Aabb {
        let size = Vec3::new(
            self.extents[0] as f64,
            self.extents[1] as f64,
            self.extents[2] as f64,
        ) * self.resolution;
        Aabb::new(self.origin, self.origin + size)
    }

    pub fn iter(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        (0..self.len()).map(|i| self.from_linear(i))
    }

    /// Inclusive voxel index range covering an axis-aligned box, clipped to the grid.
    pub fn index_range(&self, b: &Aabb) -> Option<(VoxelIndex, VoxelIndex)> {
        let lo = self.voxel_of(&b.min);
        let hi = self.voxel_of(&b.max);
        let clamp = |v: i32, axis: usize| v.clamp(0, self.extents[axis] as i32 - 1);
        let lo = VoxelIndex::new(clamp(lo.x, 0), clamp(lo.y, 1), clamp(lo.z, 2));
        let hi = VoxelIndex::new(clamp(hi.x, 0), clamp(hi.y, 1), clamp(hi.z, 2));
        let inside = self.bounds();
        let overlaps = b.max.x >= inside.min.x
            && b.max.y >= inside.min.y
            && b.max.z >= inside.min.z
            && b.min.x < inside.max.x
            && b.min.y < inside.max.y
            && b.min.z < inside.max.z;
        overlaps.then_some((lo, hi))
    }
}

/// Iterate an inclusive voxel range in (z, y, x) nesting order, x fastest.
pub fn for_each_in_range(lo: VoxelIndex, hi: VoxelIndex, mut f: impl FnMut(VoxelIndex)) {
    for z in lo.z..=hi.z {
        for y in lo.y..=hi.y {
            for x in lo.x..=hi.x {
                f(VoxelIndex::new(x, y, z));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn centered(center: Vec3, size: Vec3) -> Self {
        Self::new(center - size / 2.0, center + size / 2.0)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn expanded(&self, half: &Vec3) -> Aabb {
        Aabb::new(self.min - half, self.max + half)
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn intersection(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.sup(&other.min), self.max.inf(&other.max))
    }

    /// Open-interval overlap: boxes that only touch on a face do not overlap.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    /// Slab test for the segment `a -> b`. Returns the parametric entry and
    /// exit `(t0, t1)` within `[0, 1]` when the segment meets the open box.
    pub fn segment_clip(&self, a: &Vec3, b: &Vec3) -> Option<(f64, f64)> {
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for i in 0..3 {
            if d[i].abs() < 1e-300 {
                if a[i] <= self.min[i] || a[i] >= self.max[i] {
                    return None;
                }
            } else {
                let inv = 1.0 / d[i];
                let mut ta = (self.min[i] - a[i]) * inv;
                let mut tb = (self.max[i] - a[i]) * inv;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

/// Exact grid traversal after Amanatides & Woo. Yields every voxel the ray
/// pierces together with the ray parameter at which it is entered, for entry
/// parameters in `[0, t_end]`. The first voxel is the one holding the origin.
#[derive(Debug, Clone)]
pub struct VoxelTraversal {
    current: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_entry: f64,
    t_end: f64,
    started: bool,
    finished: bool,
}

impl VoxelTraversal {
    pub fn new(grid: &Grid, origin: &Vec3, dir: &Vec3, t_end: f64) -> Self {
        let rel = (origin - grid.origin) / grid.resolution;
        let mut current = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            let cell = rel[i].floor();
            current[i] = cell as i64;
            if dir[i] > 0.0 {
                step[i] = 1;
                t_delta[i] = grid.resolution / dir[i];
                t_max[i] = (cell + 1.0 - rel[i]) * grid.resolution / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                t_delta[i] = -grid.resolution / dir[i];
                t_max[i] = (rel[i] - cell) * grid.resolution / -dir[i];
            }
        }
        Self {
            current,
            step,
            t_max,
            t_delta,
            t_entry: 0.0,
            t_end,
            started: false,
            finished: false,
        }
    }
}

impl Iterator for VoxelTraversal {
    type Item = (VoxelIndex, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if self.started {
            let axis = if self.t_max[0] <= self.t_max[1] {
                if self.t_max[0] <= self.t_max[2] {
                    0
                } else {
                    2
                }
            } else if self.t_max[1] <= self.t_max[2] {
                1
            } else {
                2
            };
            let t = self.t_max[axis];
            if !(t <= self.t_end) {
                self.finished = true;
                return None;
            }
            self.current[axis] += self.step[axis];
            self.t_max[axis] += self.t_delta[axis];
            self.t_entry = t;
        }
        self.started = true;
        let [x, y, z] = self.current;
        if [x, y, z].iter().any(|c| *c < i32::MIN as i64 || *c > i32::MAX as i64) {
            self.finished = true;
            return None;
        }
        Some((VoxelIndex::new(x as i32, y as i32, z as i32), self.t_entry))
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(Vec3::zeros(), 1.0, [n, n, n])
    }

    #[test]
    fn traversal_visits_axis_cells_in_order() {
        let g = unit_grid(10);
        let cells: Vec<_> =
            VoxelTraversal::new(&g, &Vec3::new(0.5, 0.5, 0.5), &Vec3::x(), 3.0).collect();
        let xs: Vec<i32> = cells.iter().map(|(v, _)| v.x).collect();
        assert_eq!(xs, vec![0, 1, 2, 3]);
        assert_eq!(cells[1].1, 0.5);
        assert_eq!(cells[3].1, 2.5);
    }

    #[test]
    fn traversal_diagonal_is_face_connected() {
        let g = unit_grid(10);
        let d = Vec3::new(1.0, 0.7, 0.3).normalize();
        let cells: Vec<_> = VoxelTraversal::new(&g, &Vec3::new(0.2, 0.3, 0.4), &d, 6.0)
            .map(|(v, _)| v)
            .collect();
        for w in cells.windows(2) {
            let dist = (w[0].x - w[1].x).abs() + (w[0].y - w[1].y).abs() + (w[0].z - w[1].z).abs();
            assert_eq!(dist, 1);
        }
    }

    #[test]
    fn traversal_negative_direction() {
        let g = unit_grid(10);
        let cells: Vec<_> = VoxelTraversal::new(&g, &Vec3::new(5.5, 5.5, 5.5), &-Vec3::y(), 2.0)
            .map(|(v, _)| v.y)
            .collect();
        assert_eq!(cells, vec![5, 4, 3]);
    }

    #[test]
    fn segment_clip_hit_and_miss() {
        let b = Aabb::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0));
        let (t0, t1) =
            b.segment_clip(&Vec3::new(0.0, 1.5, 1.5), &Vec3::new(3.0, 1.5, 1.5)).unwrap();
        assert!((t0 - 1.0 / 3.0).abs() < 1e-12 && (t1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(b.segment_clip(&Vec3::new(0.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0)).is_none());
        // Touching a face is not a hit.
        assert!(b.segment_clip(&Vec3::new(0.0, 1.0, 1.5), &Vec3::new(3.0, 1.0, 1.5)).is_none());
    }

    #[test]
    fn linear_index_round_trip() {
        let g = Grid::new(Vec3::zeros(), 0.2, [7, 5, 3]);
        for i in 0..g.len() {
            assert_eq!(g.linear(g.from_linear(i)), i);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }
}
