use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{pose_is_free, segment_is_free, RobotBox};
use crate::geometry::{Aabb, Pose, Vec3};
use crate::graph::PlanGraph;
use crate::map::OccupancyMap;

use super::ExploreError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalGraphParams {
    pub n_vertices: usize,
    pub max_edge_len: f64,
    /// Samples closer than this to an existing vertex are discarded.
    pub min_spacing: f64,
    /// Neighbours tried per new vertex beyond its parent.
    pub max_neighbors: usize,
    pub max_attempts: usize,
    pub robot: RobotBox,
    pub seed: u64,
}

impl Default for LocalGraphParams {
    fn default() -> Self {
        Self {
            n_vertices: 40,
            max_edge_len: 1.6,
            min_spacing: 0.4,
            max_neighbors: 6,
            max_attempts: 600,
            robot: RobotBox::planning(),
            seed: 0,
        }
    }
}

/// Grows a random geometric graph from `root` inside `bounds`. Each sample
/// is steered to within `max_edge_len` of its nearest vertex, so every
/// accepted vertex is connected to the root through collision-free edges.
/// A graph holding only the root signals a local dead end.
pub fn sample_local_graph(
    map: &OccupancyMap,
    root: &Pose,
    bounds: &Aabb,
    params: &LocalGraphParams,
) -> Result<PlanGraph, ExploreError> {
    let robot = &params.robot;
    if !pose_is_free(map, robot, &root.position) {
        return Err(ExploreError::RootInCollision);
    }
    let mut g = PlanGraph::new(root.position, root.yaw);
    let inner = map.bounds().intersection(bounds);
    let half = robot.half();
    let lo = inner.min + half;
    let hi = inner.max - half;
    if (0..3).any(|i| lo[i] >= hi[i]) {
        return Ok(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut attempts = 0;
    while g.len() < params.n_vertices + 1 && attempts < params.max_attempts {
        attempts += 1;
        let mut p = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
        let (near, d) = nearest(&g, &p);
        if d > params.max_edge_len {
            p = g.position(near) + (p - g.position(near)) * (params.max_edge_len / d);
        }
        if nearest(&g, &p).1 < params.min_spacing {
            continue;
        }
        if !pose_is_free(map, robot, &p) || !segment_is_free(map, robot, &g.position(near), &p) {
            continue;
        }
        let dir = p - g.position(near);
        let id = g.add_vertex(p, dir.y.atan2(dir.x));
        g.add_edge(near, id).expect("valid ids");
        let mut others: Vec<(usize, f64)> = (0..id)
            .filter(|&v| v != near)
            .map(|v| (v, (g.position(v) - p).norm()))
            .filter(|(_, d)| *d <= params.max_edge_len)
            .collect();
        others.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (v, _) in others.into_iter().take(params.max_neighbors) {
            if segment_is_free(map, robot, &g.position(v), &p) {
                g.add_edge(v, id).expect("valid ids");
            }
        }
    }
    Ok(g)
}

fn nearest(g: &PlanGraph, p: &Vec3) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in g.vertices().iter().enumerate() {
        let d = (v.position - p).norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, VoxelIndex};
    use crate::map::MapParams;

    fn room() -> OccupancyMap {
        let mut m = OccupancyMap::new(Grid::new(Vec3::zeros(), 0.2, [40, 40, 15]), MapParams::default()).unwrap();
        for v in m.grid().iter().collect::<Vec<_>>() {
            let edge = v.x == 0 || v.y == 0 || v.z == 0 || v.x == 39 || v.y == 39 || v.z == 14;
            m.set_log_odds(v, if edge { 3.5 } else { -3.5 });
        }
        m
    }

    fn independent_edge_free(m: &OccupancyMap, a: &Vec3, b: &Vec3, robot: &RobotBox) -> bool {
        // Dense sampling of the swept box; conservative against grazing.
        let n = (((b - a).norm() / 0.02).ceil() as usize).max(1);
        (0..=n).all(|k| {
            let c = a + (b - a) * (k as f64 / n as f64);
            let bx = robot.at(&c);
            let Some((lo, hi)) = m.grid().index_range(&bx) else { return false };
            let mut ok = true;
            for x in lo.x..=hi.x {
                for y in lo.y..=hi.y {
                    for z in lo.z..=hi.z {
                        let v = VoxelIndex::new(x, y, z);
                        if !m.is_free(v) && m.grid().voxel_box(v).overlaps(&bx) {
                            ok = false;
                        }
                    }
                }
            }
            ok
        })
    }

    #[test]
    fn empty_room_edges_recheck() {
        let m = room();
        let root = Pose::from_xyz_yaw(4.03, 4.01, 1.47, 0.0);
        let params = LocalGraphParams { n_vertices: 25, ..Default::default() };
        let g = sample_local_graph(&m, &root, &m.bounds(), &params).unwrap();
        assert_eq!(g.len(), 26);
        assert!(g.reachable_from_root().iter().all(|r| *r));
        for (a, b, _) in g.edges() {
            assert!(independent_edge_free(&m, &g.position(a), &g.position(b), &params.robot));
        }
        let ext = g.vertices().iter().map(|v| v.position.x).fold(0.0, f64::max)
            - g.vertices().iter().map(|v| v.position.x).fold(10.0, f64::min);
        assert!(ext > 3.0, "graph should spread, extent {ext}");
    }

    #[test]
    fn enclosed_root_is_dead_end() {
        let mut m = room();
        let root = Pose::from_xyz_yaw(4.1, 4.1, 1.5, 0.0);
        let c = m.grid().voxel_of(&root.position);
        for v in m.grid().iter().collect::<Vec<_>>() {
            let d = (v.x - c.x).abs().max((v.y - c.y).abs()).max((v.z - c.z).abs());
            if d == 2 {
                m.set_log_odds(v, 3.5);
            }
        }
        // Interior leaves 0.1 m of play around a 0.5 m box.
        let params = LocalGraphParams { robot: RobotBox { size: Vec3::new(0.5, 0.5, 0.3) }, ..Default::default() };
        let g = sample_local_graph(&m, &root, &m.bounds(), &params).unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn root_collision_errors() {
        let mut m = room();
        m.set_log_odds(VoxelIndex::new(20, 20, 7), 3.5);
        let root = Pose::from_xyz_yaw(4.1, 4.1, 1.5, 0.0);
        assert_eq!(
            sample_local_graph(&m, &root, &m.bounds(), &LocalGraphParams::default()),
            Err(ExploreError::RootInCollision)
        );
    }

    #[test]
    fn seeded_runs_identical() {
        let m = room();
        let root = Pose::from_xyz_yaw(4.03, 4.01, 1.47, 0.0);
        let p = LocalGraphParams { seed: 9, ..Default::default() };
        let a = sample_local_graph(&m, &root, &m.bounds(), &p).unwrap();
        let b = sample_local_graph(&m, &root, &m.bounds(), &p).unwrap();
        assert_eq!(a, b);
    }
}
