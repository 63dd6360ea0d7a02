use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Grid, Vec3, VoxelIndex, VoxelTraversal};
use crate::graph::PlanGraph;

use super::OccupancyMap;

/// 2.5D height field over map columns. `NaN` marks cells with no support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationMap {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub heights: Vec<f64>,
}

impl ElevationMap {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin[0]) / self.cell_size).floor();
        let j = ((y - self.origin[1]) / self.cell_size).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny).then_some((i as usize, j as usize))
    }

    pub fn height(&self, i: usize, j: usize) -> Option<f64> {
        let h = *self.heights.get(j * self.nx + i)?;
        (!h.is_nan()).then_some(h)
    }

    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.cell_of(x, y).and_then(|(i, j)| self.height(i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn valid_count(&self) -> usize {
        self.heights.iter().filter(|h| !h.is_nan()).count()
    }

    fn plane(&self) -> Grid {
        Grid::new(Vec3::new(self.origin[0], self.origin[1], 0.0), self.cell_size, [self.nx, self.ny, 1])
    }

    /// Cells crossed by the horizontal projection of `a -> b`, in order.
    pub fn cells_along(&self, a: &Vec3, b: &Vec3) -> Vec<(usize, usize)> {
        let grid = self.plane();
        let o = Vec3::new(a.x, a.y, 0.5 * self.cell_size);
        let d = Vec3::new(b.x - a.x, b.y - a.y, 0.0);
        let len = d.norm();
        let dir = if len > 0.0 { d / len } else { Vec3::x() };
        VoxelTraversal::new(&grid, &o, &dir, len)
            .map(|(v, _)| (v.x, v.y))
            .map(|(x, y)| if x < 0 || y < 0 { (usize::MAX, usize::MAX) } else { (x as usize, y as usize) })
            .collect()
    }
}

/// Top occupied surface per map column, scanning down from the region's
/// ceiling. Columns with no occupied voxel in the region are invalid.
pub fn build_elevation(map: &OccupancyMap, region: &Aabb) -> ElevationMap {
    let grid = map.grid();
    let res = grid.resolution;
    let Some((lo, hi)) = grid.index_range(region) else {
        return ElevationMap { origin: [region.min.x, region.min.y], cell_size: res, nx: 0, ny: 0, heights: vec![] };
    };
    let nx = (hi.x - lo.x + 1) as usize;
    let ny = (hi.y - lo.y + 1) as usize;
    let origin = grid.origin + Vec3::new(lo.x as f64, lo.y as f64, 0.0) * res;
    let mut heights = vec![f64::NAN; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (lo.x + i as i32, lo.y + j as i32);
            for z in (lo.z..=hi.z).rev() {
                if map.is_occupied(VoxelIndex::new(x, y, z)) {
                    heights[j * nx + i] = grid.origin.z + (z + 1) as f64 * res;
                    break;
                }
            }
        }
    }
    ElevationMap { origin: [origin.x, origin.y], cell_size: res, nx, ny, heights }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityLimits {
    pub max_step: f64,
    pub max_incline: f64,
    /// Minimum horizontal separation over which incline is measured; shorter
    /// spans are governed by `max_step` alone.
    pub incline_baseline: f64,
}

impl Default for TraversabilityLimits {
    fn default() -> Self {
        Self { max_step: 0.25, max_incline: 30f64.to_radians(), incline_baseline: 1.0 }
    }
}

/// True when the height profile along `a -> b` respects `limits`.
pub fn edge_traversable(elev: &ElevationMap, a: &Vec3, b: &Vec3, limits: &TraversabilityLimits) -> bool {
    let cells = elev.cells_along(a, b);
    let mut profile = Vec::with_capacity(cells.len());
    for (i, j) in cells {
        match elev.height(i, j) {
            Some(h) if i != usize::MAX => profile.push((elev.cell_center(i, j), h)),
            _ => return false,
        }
    }
    profile_ok(&profile, limits)
}

fn profile_ok(profile: &[([f64; 2], f64)], limits: &TraversabilityLimits) -> bool {
    if profile.windows(2).any(|w| (w[1].1 - w[0].1).abs() > limits.max_step) {
        return false;
    }
    let slope = limits.max_incline.tan();
    for i in 0..profile.len() {
        for j in i + 1..profile.len() {
            let (ci, hi) = profile[i];
            let (cj, hj) = profile[j];
            let dist = ((cj[0] - ci[0]).powi(2) + (cj[1] - ci[1]).powi(2)).sqrt();
            if dist >= limits.incline_baseline && (hj - hi).abs() > slope * dist {
                return false;
            }
        }
    }
    true
}

/// Removes edges that violate `limits`, then vertices left without edges.
/// The root is always kept.
pub fn prune_untraversable(graph: &PlanGraph, elev: &ElevationMap, limits: &TraversabilityLimits) -> PlanGraph {
    let mut g = graph.clone();
    for (a, b, _) in graph.edges() {
        if !edge_traversable(elev, &graph.position(a), &graph.position(b), limits) {
            g.remove_edge(a, b);
        }
    }
    let keep: Vec<bool> = (0..g.len()).map(|v| !g.neighbors(v).is_empty()).collect();
    g.retain(&keep);
    g
}
