//! Online tri-state occupancy mapping.
//!
//! The map shares its lattice with the ground-truth world it observes and
//! replays every frame along the exact rays it was rendered with, so with
//! noise off nothing occupied is ever labelled free.

mod elevation;
mod frontier;
mod io;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::geometry::{for_each_in_range, Aabb, Grid, Pose, Vec3, VoxelIndex, VoxelTraversal};
use crate::world::{sensor_rays, SensorFrame, SensorModel, VoxelWorld};

pub use elevation::{build_elevation, prune_untraversable, ElevationMap, TraversabilityLimits};
pub use frontier::extract_frontiers;
pub use io::{read_map, write_map, MAP_MAGIC, MAP_VERSION};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("pose {0:?} outside map bounds")]
    PoseOutside(Vec3),
    #[error("frame from {0} carries no range image")]
    NotRangeImage(String),
    #[error("range image is {found:?}, sensor model expects {expected:?}")]
    Malformed { expected: (usize, usize), found: (usize, usize) },
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Unknown,
    Free,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub l_occ: f64,
    pub l_free: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// Occupancy probability at or above which a voxel is occupied.
    pub occ_threshold: f64,
    /// Occupancy probability at or below which a voxel is free.
    pub free_threshold: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self { l_occ: 0.85, l_free: 0.4, l_min: -3.5, l_max: 3.5, occ_threshold: 0.7, free_threshold: 0.3 }
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl MapParams {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::InvalidParams(m.into()));
        if !(self.l_occ > 0.0 && self.l_free > 0.0) {
            return bad("update increments must be positive");
        }
        if !(self.l_min < 0.0 && self.l_max > 0.0) {
            return bad("clamp must straddle zero");
        }
        if !(0.0 < self.free_threshold && self.free_threshold < self.occ_threshold && self.occ_threshold < 1.0) {
            return bad("need 0 < free_threshold < occ_threshold < 1");
        }
        Ok(())
    }

    pub fn occ_log_odds(&self) -> f64 {
        logit(self.occ_threshold)
    }

    pub fn free_log_odds(&self) -> f64 {
        logit(self.free_threshold)
    }
}

const BLOCK: i32 = 8;
const BLOCK_LEN: usize = (BLOCK * BLOCK * BLOCK) as usize;

type Block = Box<[f32; BLOCK_LEN]>;

fn block_key(v: VoxelIndex) -> [i32; 3] {
    [v.x.div_euclid(BLOCK), v.y.div_euclid(BLOCK), v.z.div_euclid(BLOCK)]
}

fn block_slot(v: VoxelIndex) -> usize {
    let (x, y, z) = (v.x.rem_euclid(BLOCK), v.y.rem_euclid(BLOCK), v.z.rem_euclid(BLOCK));
    (x + BLOCK * (y + BLOCK * z)) as usize
}

/// Counts of voxel updates applied by one scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub rays: usize,
    pub free_updates: usize,
    pub occupied_updates: usize,
}

/// Sparse log-odds occupancy map over a fixed lattice, stored in 8^3 blocks.
/// Absent voxels are unknown.
#[derive(Debug, Clone)]
pub struct OccupancyMap {
    grid: Grid,
    params: MapParams,
    blocks: FxHashMap<[i32; 3], Block>,
    occ_lo: f64,
    free_lo: f64,
    scratch: Vec<u8>,
}

impl PartialEq for OccupancyMap {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.params == other.params
            && self.grid.iter().all(|v| {
                let (a, b) = (self.log_odds(v), other.log_odds(v));
                a.map(f32::to_bits) == b.map(f32::to_bits)
            })
    }
}

impl OccupancyMap {
    pub fn new(grid: Grid, params: MapParams) -> Result<Self, MapError> {
        params.validate()?;
        Ok(Self {
            grid,
            params,
            blocks: FxHashMap::default(),
            occ_lo: params.occ_log_odds(),
            free_lo: params.free_log_odds(),
            scratch: Vec::new(),
        })
    }

    /// Empty map over the same lattice as `world`.
    pub fn for_world(world: &VoxelWorld, params: MapParams) -> Result<Self, MapError> {
        Self::new(*world.grid(), params)
    }

    /// A fully known map of `world`, every voxel clamped to its true state.
    pub fn from_ground_truth(world: &VoxelWorld, params: MapParams) -> Result<Self, MapError> {
        let mut m = Self::for_world(world, params)?;
        let (lo, hi) = (m.params.l_min, m.params.l_max);
        for (i, occ) in world.occupancy().iter().enumerate() {
            m.set_log_odds(m.grid.from_linear(i), if *occ { hi } else { lo });
        }
        Ok(m)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution
    }

    pub fn bounds(&self) -> Aabb {
        self.grid.bounds()
    }

    pub fn log_odds(&self, v: VoxelIndex) -> Option<f32> {
        if !self.grid.contains(v) {
            return None;
        }
        let x = self.blocks.get(&block_key(v))?[block_slot(v)];
        (!x.is_nan()).then_some(x)
    }

    fn slot_mut(&mut self, v: VoxelIndex) -> &mut f32 {
        let b = self.blocks.entry(block_key(v)).or_insert_with(|| Box::new([f32::NAN; BLOCK_LEN]));
        &mut b[block_slot(v)]
    }

    /// Stores `value` clamped to the map's bounds. Ignores voxels off the lattice.
    pub fn set_log_odds(&mut self, v: VoxelIndex, value: f64) {
        if self.grid.contains(v) {
            let c = value.clamp(self.params.l_min, self.params.l_max) as f32;
            *self.slot_mut(v) = c;
        }
    }

    /// Adds `delta` to the voxel's log-odds (absent counts as 0), clamped.
    pub fn update(&mut self, v: VoxelIndex, delta: f64) {
        if self.grid.contains(v) {
            let (lo, hi) = (self.params.l_min, self.params.l_max);
            let s = self.slot_mut(v);
            let cur = if s.is_nan() { 0.0 } else { *s as f64 };
            *s = (cur + delta).clamp(lo, hi) as f32;
        }
    }

    pub fn classify(&self, v: VoxelIndex) -> Occupancy {
        match self.log_odds(v) {
            Some(l) if l as f64 >= self.occ_lo => Occupancy::Occupied,
            Some(l) if l as f64 <= self.free_lo => Occupancy::Free,
            _ => Occupancy::Unknown,
        }
    }

    pub fn classify_at(&self, p: &Vec3) -> Occupancy {
        self.classify(self.grid.voxel_of(p))
    }

    pub fn is_free(&self, v: VoxelIndex) -> bool {
        self.classify(v) == Occupancy::Free
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        self.classify(v) == Occupancy::Occupied
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Voxels with a stored value, in lattice order.
    pub fn known_voxels(&self) -> Vec<VoxelIndex> {
        let mut keys: Vec<&[i32; 3]> = self.blocks.keys().collect();
        keys.sort_unstable_by_key(|k| (k[2], k[1], k[0]));
        let mut out = Vec::new();
        for k in keys {
            let b = &self.blocks[k];
            for (slot, val) in b.iter().enumerate() {
                if !val.is_nan() {
                    let s = slot as i32;
                    out.push(VoxelIndex::new(
                        k[0] * BLOCK + s % BLOCK,
                        k[1] * BLOCK + (s / BLOCK) % BLOCK,
                        k[2] * BLOCK + s / (BLOCK * BLOCK),
                    ));
                }
            }
        }
        out.sort_unstable_by_key(|v| self.grid.linear(*v));
        out
    }

    pub fn count(&self, class: Occupancy) -> usize {
        match class {
            Occupancy::Unknown => {
                self.grid.len() - self.count(Occupancy::Free) - self.count(Occupancy::Occupied)
            }
            _ => self
                .blocks
                .values()
                .flat_map(|b| b.iter())
                .filter(|l| !l.is_nan())
                .filter(|l| {
                    let l = **l as f64;
                    match class {
                        Occupancy::Free => l <= self.free_lo,
                        _ => l >= self.occ_lo,
                    }
                })
                .count(),
        }
    }

    /// True when every voxel overlapping the open box is free.
    pub fn box_is_free(&self, b: &Aabb) -> bool {
        let inside = self.grid.bounds();
        if (0..3).any(|i| b.min[i] < inside.min[i] || b.max[i] > inside.max[i]) {
            return false;
        }
        let Some((lo, hi)) = self.grid.index_range(b) else {
            return false;
        };
        let mut ok = true;
        for_each_in_range(lo, hi, |v| {
            if ok && self.grid.voxel_box(v).overlaps(b) && !self.is_free(v) {
                ok = false;
            }
        });
        ok
    }

    /// Integrates one range frame captured at `body_pose`. Each voxel gets
    /// at most one update per scan; an occupied observation wins over free.
    pub fn integrate_scan(
        &mut self,
        body_pose: &Pose,
        frame: &SensorFrame,
        model: &SensorModel,
    ) -> Result<ScanSummary, MapError> {
        if !self.grid.contains_point(&body_pose.position) {
            return Err(MapError::PoseOutside(body_pose.position));
        }
        let depth = frame.depth().ok_or_else(|| MapError::NotRangeImage(frame.sensor_id.clone()))?;
        let (origin, rows, cols, dirs) = sensor_rays(body_pose, model);
        if (depth.rows, depth.cols) != (rows, cols) {
            return Err(MapError::Malformed { expected: (rows, cols), found: (depth.rows, depth.cols) });
        }
        if frame.embedded || !self.grid.contains_point(&origin) {
            return Ok(ScanSummary::default());
        }
        Ok(self.integrate_rays(&origin, &dirs, &depth.ranges, model.max_range))
    }

    /// Integrates rays from `origin`. A finite range at most `max_range` is a
    /// return; anything else clears the ray out to `max_range`.
    pub fn integrate_rays(&mut self, origin: &Vec3, dirs: &[Vec3], ranges: &[f64], max_range: f64) -> ScanSummary {
        let grid = self.grid;
        let marks: Vec<Vec<(VoxelIndex, bool)>> = dirs
            .par_iter()
            .zip(ranges.par_iter())
            .map(|(d, &r)| trace_ray(&grid, origin, d, r, max_range))
            .collect();

        // 0 untouched, 1 free, 2 occupied; occupied wins within a scan.
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.resize(grid.len(), 0);
        let mut touched: Vec<usize> = Vec::new();
        for ray in &marks {
            for &(v, occ) in ray {
                let i = grid.linear(v);
                let m = 1 + occ as u8;
                if scratch[i] == 0 {
                    touched.push(i);
                }
                scratch[i] = scratch[i].max(m);
            }
        }
        touched.sort_unstable();
        let touched: Vec<(VoxelIndex, bool)> = touched
            .into_iter()
            .map(|i| {
                let occ = scratch[i] == 2;
                scratch[i] = 0;
                (grid.from_linear(i), occ)
            })
            .collect();
        self.scratch = scratch;

        let mut summary = ScanSummary { rays: dirs.len(), ..Default::default() };
        let (l_occ, l_free) = (self.params.l_occ, self.params.l_free);
        for (v, occ) in touched {
            if occ {
                self.update(v, l_occ);
                summary.occupied_updates += 1;
            } else {
                self.update(v, -l_free);
                summary.free_updates += 1;
            }
        }
        summary
    }

    /// Marks every voxel whose center lies in `b` free, saturating the log-odds.
    pub fn clear_box(&mut self, b: &Aabb) {
        if let Some((lo, hi)) = self.grid.index_range(b) {
            let l_min = self.params.l_min;
            let mut vs = Vec::new();
            for_each_in_range(lo, hi, |v| {
                if b.contains(&self.grid.center(v)) {
                    vs.push(v);
                }
            });
            for v in vs {
                self.set_log_odds(v, l_min);
            }
        }
    }
}

/// Voxel marks along one ray: `true` for the return voxel. The return voxel
/// is the one entered exactly at the range, or else the one whose span
/// contains it.
fn trace_ray(grid: &Grid, origin: &Vec3, dir: &Vec3, range: f64, max_range: f64) -> Vec<(VoxelIndex, bool)> {
    let mut out = Vec::new();
    let is_return = range.is_finite() && range <= max_range;
    let push = |out: &mut Vec<(VoxelIndex, bool)>, v: VoxelIndex, occ: bool| {
        if grid.contains(v) {
            out.push((v, occ));
        }
    };
    if !is_return {
        for (v, t) in VoxelTraversal::new(grid, origin, dir, max_range) {
            if t >= max_range || !grid.contains(v) {
                break;
            }
            push(&mut out, v, false);
        }
        return out;
    }
    let mut pending: Option<VoxelIndex> = None;
    for (v, t) in VoxelTraversal::new(grid, origin, dir, range + grid.resolution) {
        if t < range {
            if let Some(p) = pending.replace(v) {
                push(&mut out, p, false);
            }
            continue;
        }
        if t == range || pending.is_none() {
            if let Some(p) = pending.take() {
                push(&mut out, p, false);
            }
            push(&mut out, v, true);
        } else if let Some(p) = pending.take() {
            push(&mut out, p, true);
        }
        return out;
    }
    if let Some(p) = pending {
        push(&mut out, p, true);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{render_frame, Payload, RangeImage, SensorKind};
    use proptest::prelude::*;

    fn empty_map() -> OccupancyMap {
        OccupancyMap::new(Grid::new(Vec3::zeros(), 0.2, [40, 20, 10]), MapParams::default()).unwrap()
    }

    fn one_ray(map: &mut OccupancyMap, range: f64) -> ScanSummary {
        map.integrate_rays(&Vec3::new(0.51, 2.03, 1.01), &[Vec3::x()], &[range], 30.0)
    }

    #[test]
    fn thresholds() {
        let p = MapParams::default();
        assert!((p.occ_log_odds() - 0.8473).abs() < 1e-3);
        assert!((p.free_log_odds() + 0.8473).abs() < 1e-3);
        let bad = MapParams { free_threshold: 0.8, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn one_ray_line_of_free_and_endpoint() {
        let mut m = empty_map();
        let s = one_ray(&mut m, 1.5);
        assert_eq!(s.occupied_updates, 1);
        assert_eq!(s.free_updates, 8);
        for x in 2..10 {
            assert_eq!(m.log_odds(VoxelIndex::new(x, 10, 5)), Some(-0.4));
        }
        assert_eq!(m.log_odds(VoxelIndex::new(10, 10, 5)), Some(0.85));
        assert_eq!(m.log_odds(VoxelIndex::new(11, 10, 5)), None);
        assert_eq!(m.classify(VoxelIndex::new(0, 0, 0)), Occupancy::Unknown);
    }

    #[test]
    fn mid_voxel_return_marks_containing_voxel() {
        let mut m = empty_map();
        one_ray(&mut m, 1.6);
        // 0.51 + 1.6 = 2.11 lies in voxel 10.
        assert_eq!(m.log_odds(VoxelIndex::new(10, 10, 5)), Some(0.85));
        assert_eq!(m.log_odds(VoxelIndex::new(9, 10, 5)), Some(-0.4));
    }

    #[test]
    fn repeated_hits_accumulate_to_clamp() {
        for k in 1..=8 {
            let mut m = empty_map();
            for _ in 0..k {
                one_ray(&mut m, 1.5);
            }
            let v = m.log_odds(VoxelIndex::new(10, 10, 5)).unwrap() as f64;
            let expected = (k as f64 * 0.85).min(3.5);
            assert!((v - expected).abs() < 1e-5, "k={k}: {v} vs {expected}");
        }
    }

    #[test]
    fn alternating_hit_free() {
        let target = VoxelIndex::new(10, 10, 5);
        for n in 1..=12 {
            let mut m = empty_map();
            let mut oracle = 0.0f64;
            for _ in 0..n {
                one_ray(&mut m, 1.5);
                one_ray(&mut m, 3.0);
                oracle = (oracle + 0.85).clamp(-3.5, 3.5);
                oracle = (oracle - 0.4).clamp(-3.5, 3.5);
            }
            let v = m.log_odds(target).unwrap() as f64;
            assert!((v - oracle).abs() < 1e-5);
            if n <= 6 {
                assert!((v - n as f64 * 0.45).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn no_return_clears_to_max_range() {
        let mut m = empty_map();
        m.integrate_rays(&Vec3::new(0.51, 2.03, 1.01), &[Vec3::x()], &[f64::INFINITY], 1.0);
        assert_eq!(m.count(Occupancy::Occupied), 0);
        assert!(m.log_odds(VoxelIndex::new(7, 10, 5)).is_some());
        assert!(m.log_odds(VoxelIndex::new(8, 10, 5)).is_none());
    }

    #[test]
    fn free_needs_three_passes() {
        let mut m = empty_map();
        let v = VoxelIndex::new(5, 10, 5);
        for expected in [Occupancy::Unknown, Occupancy::Unknown, Occupancy::Free] {
            one_ray(&mut m, 3.0);
            assert_eq!(m.classify(v), expected);
        }
    }

    #[test]
    fn scan_dedups_per_voxel() {
        let mut m = empty_map();
        let o = Vec3::new(0.51, 2.03, 1.01);
        let d = Vec3::x();
        m.integrate_rays(&o, &[d, d, d], &[1.5, 1.5, 2.5], 30.0);
        // The shared endpoint voxel is updated once and occupied wins.
        assert_eq!(m.log_odds(VoxelIndex::new(10, 10, 5)), Some(0.85));
        assert_eq!(m.log_odds(VoxelIndex::new(4, 10, 5)), Some(-0.4));
    }

    #[test]
    fn integrate_rendered_frame_is_sound() {
        let world = crate::world::build_scenario(&crate::world::ScenarioDescriptor::bundled(
            crate::world::Generator::ClutteredRoom,
        ))
        .unwrap();
        let mut m = OccupancyMap::for_world(&world, MapParams::default()).unwrap();
        let model = SensorModel::lidar();
        let pose = *world.start_pose();
        let f = render_frame(&world, &pose, &model).unwrap();
        for _ in 0..3 {
            m.integrate_scan(&pose, &f, &model).unwrap();
        }
        assert!(m.count(Occupancy::Free) > 1000);
        for v in m.known_voxels() {
            if m.is_free(v) {
                assert!(!world.is_occupied(v));
            }
        }
    }

    #[test]
    fn scan_errors() {
        let mut m = empty_map();
        let model = SensorModel::tof();
        let outside = Pose::from_xyz_yaw(-5.0, 0.0, 0.0, 0.0);
        let frame = SensorFrame {
            sensor_id: "tof".into(),
            local_timestamp: 0.0,
            payload: Payload::Depth(RangeImage { rows: 1, cols: 1, ranges: vec![1.0] }),
            embedded: false,
        };
        assert!(matches!(m.integrate_scan(&outside, &frame, &model), Err(MapError::PoseOutside(_))));
        let inside = Pose::from_xyz_yaw(1.0, 1.0, 1.0, 0.0);
        assert!(matches!(m.integrate_scan(&inside, &frame, &model), Err(MapError::Malformed { .. })));
        let radar = SensorFrame { payload: Payload::PointCloud(vec![]), ..frame };
        let mut rm = SensorModel::radar();
        rm.kind = SensorKind::Radar;
        assert!(matches!(m.integrate_scan(&inside, &radar, &rm), Err(MapError::NotRangeImage(_))));
    }

    #[test]
    fn box_free_query() {
        let mut m = empty_map();
        let b = Aabb::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0));
        assert!(!m.box_is_free(&b));
        m.clear_box(&b.expanded(&Vec3::repeat(0.1)));
        assert!(m.box_is_free(&b));
        m.set_log_odds(VoxelIndex::new(7, 7, 7), 3.5);
        assert!(!m.box_is_free(&b));
    }

    proptest! {
        #[test]
        fn classify_matches_threshold_oracle(
            vals in proptest::collection::vec(proptest::option::of(-5.0f64..5.0), 64)
        ) {
            let mut m = empty_map();
            let p = *m.params();
            for (i, v) in vals.iter().enumerate() {
                if let Some(v) = v {
                    m.set_log_odds(VoxelIndex::new(i as i32 % 8, i as i32 / 8, 0), *v);
                }
            }
            for (i, v) in vals.iter().enumerate() {
                let idx = VoxelIndex::new(i as i32 % 8, i as i32 / 8, 0);
                let expected = match v {
                    None => Occupancy::Unknown,
                    Some(v) => {
                        let c = v.clamp(p.l_min, p.l_max) as f32 as f64;
                        let prob = 1.0 / (1.0 + (-c).exp());
                        if prob >= p.occ_threshold - 1e-12 { Occupancy::Occupied }
                        else if prob <= p.free_threshold + 1e-12 { Occupancy::Free }
                        else { Occupancy::Unknown }
                    }
                };
                prop_assert_eq!(m.classify(idx), expected);
            }
        }

        #[test]
        fn stored_values_within_clamp(deltas in proptest::collection::vec(-2.0f64..2.0, 1..50)) {
            let mut m = empty_map();
            let v = VoxelIndex::new(3, 3, 3);
            for d in deltas {
                m.update(v, d);
                let l = m.log_odds(v).unwrap() as f64;
                prop_assert!((-3.5..=3.5).contains(&l));
            }
        }

        #[test]
        fn disjoint_ray_order_independent(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let o = Vec3::new(4.01, 2.03, 1.01);
            let dirs: Vec<Vec3> = (0..6).map(|k| {
                let a = k as f64 * 1.0;
                Vec3::new(a.cos(), a.sin(), 0.0)
            }).collect();
            let ranges = [1.3, 2.2, 0.9, f64::INFINITY, 1.7, 2.9];
            let mut a = empty_map();
            a.integrate_rays(&o, &dirs, &ranges, 3.0);
            let pd: Vec<Vec3> = perm.iter().map(|&i| dirs[i]).collect();
            let pr: Vec<f64> = perm.iter().map(|&i| ranges[i]).collect();
            let mut b = empty_map();
            b.integrate_rays(&o, &pd, &pr, 3.0);
            prop_assert!(a == b);
        }
    }
}
