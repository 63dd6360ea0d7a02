use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{pose_is_free, segment_is_free, RobotBox};
use crate::geometry::{Pose, Vec3};
use crate::graph::{Path, PlanGraph};
use crate::map::OccupancyMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TourParams {
    /// Random free-space samples added to the roadmap.
    pub roadmap_samples: usize,
    pub connect_radius: f64,
    pub max_neighbors: usize,
    pub robot: RobotBox,
    pub max_height: Option<f64>,
    pub seed: u64,
}

impl Default for TourParams {
    fn default() -> Self {
        Self {
            roadmap_samples: 400,
            connect_radius: 2.5,
            max_neighbors: 16,
            robot: RobotBox::planning(),
            max_height: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Indices into the input viewpoints, in visiting order.
    pub order: Vec<usize>,
    /// Start followed by every roadmap waypoint to the last viewpoint.
    pub path: Path,
    /// Viewpoints with no roadmap connection to the start.
    pub unreachable: Vec<usize>,
    pub length: f64,
}

/// Length of the open tour `0 -> order[0] -> order[1] -> ...`.
pub fn tour_cost(cost: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &v in order {
        total += cost[prev][v];
        prev = v;
    }
    total
}

const EPS: f64 = 1e-10;

/// Open tour from node 0 through every other node of a symmetric cost
/// matrix: nearest-neighbour construction refined by 2-opt and Or-opt
/// moves until neither improves.
pub fn open_tour(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut seq = vec![0];
    let mut left: Vec<usize> = (1..n).collect();
    while !left.is_empty() {
        let last = *seq.last().unwrap();
        let (k, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| cost[last][*a.1].total_cmp(&cost[last][*b.1]).then(a.1.cmp(b.1)))
            .unwrap();
        seq.push(left.swap_remove(k));
    }
    loop {
        let improved = two_opt(cost, &mut seq) | or_opt(cost, &mut seq);
        if !improved {
            break;
        }
    }
    seq[1..].to_vec()
}

fn edge(cost: &[Vec<f64>], seq: &[usize], i: usize) -> f64 {
    // Edge from seq[i] to seq[i + 1]; zero past the open end.
    if i + 1 < seq.len() {
        cost[seq[i]][seq[i + 1]]
    } else {
        0.0
    }
}

fn two_opt(cost: &[Vec<f64>], seq: &mut [usize]) -> bool {
    let n = seq.len();
    let mut any = false;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let before = edge(cost, seq, i - 1) + edge(cost, seq, j);
                let after = cost[seq[i - 1]][seq[j]] + if j + 1 < n { cost[seq[i]][seq[j + 1]] } else { 0.0 };
                if after < before - EPS {
                    seq[i..=j].reverse();
                    improved = true;
                    any = true;
                }
            }
        }
    }
    any
}

fn or_opt(cost: &[Vec<f64>], seq: &mut Vec<usize>) -> bool {
    let n = seq.len();
    let mut any = false;
    for len in 1..=3.min(n - 1) {
        let mut improved = true;
        while improved {
            improved = false;
            'outer: for i in 1..=n - len {
                let seg: Vec<usize> = seq[i..i + len].to_vec();
                let mut rest: Vec<usize> = seq[..i].to_vec();
                rest.extend_from_slice(&seq[i + len..]);
                let base = tour_cost(cost, &seq[1..]);
                for pos in 1..=rest.len() {
                    for rev in [false, true] {
                        let mut s = seg.clone();
                        if rev {
                            s.reverse();
                        }
                        let mut cand = rest[..pos].to_vec();
                        cand.extend_from_slice(&s);
                        cand.extend_from_slice(&rest[pos..]);
                        if tour_cost(cost, &cand[1..]) < base - EPS {
                            *seq = cand;
                            improved = true;
                            any = true;
                            continue 'outer;
                        }
                    }
                }
            }
        }
    }
    any
}

/// Builds a probabilistic roadmap over the viewpoints, the start and random
/// free samples, then orders reachable viewpoints with [`open_tour`] over
/// roadmap distances. Every path segment is a checked roadmap edge.
pub fn connect_and_tour(viewpoints: &[Pose], start: &Pose, map: &OccupancyMap, params: &TourParams) -> Tour {
    let robot = &params.robot;
    let mut g = PlanGraph::new(start.position, start.yaw);
    for v in viewpoints {
        g.add_vertex(v.position, v.yaw);
    }
    let bounds = map.bounds();
    let half = robot.half();
    let lo = bounds.min + half;
    let mut hi = bounds.max - half;
    if let Some(h) = params.max_height {
        hi.z = hi.z.min(h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    if (0..3).all(|i| lo[i] < hi[i]) {
        for _ in 0..params.roadmap_samples {
            let p = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
            if pose_is_free(map, robot, &p) {
                g.add_vertex(p, 0.0);
            }
        }
    }
    let n = g.len();
    for a in 0..n {
        let pa = g.position(a);
        let mut near: Vec<(usize, f64)> = (0..n)
            .filter(|&b| b != a)
            .map(|b| (b, (g.position(b) - pa).norm()))
            .filter(|(_, d)| *d <= params.connect_radius)
            .collect();
        near.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        for (b, _) in near.into_iter().take(params.max_neighbors) {
            if !g.has_edge(a, b) && segment_is_free(map, robot, &pa, &g.position(b)) {
                g.add_edge(a, b).expect("valid ids");
            }
        }
    }

    // Direct links between the start and viewpoints are always tried.
    let keys = viewpoints.len() + 1;
    for a in 0..keys {
        for b in a + 1..keys {
            let (pa, pb) = (g.position(a), g.position(b));
            if !g.has_edge(a, b) && (pa - pb).norm() <= 2.0 * params.connect_radius && segment_is_free(map, robot, &pa, &pb) {
                g.add_edge(a, b).expect("valid ids");
            }
        }
    }

    let from_start = g.shortest_paths(0);
    let (reach, unreachable): (Vec<usize>, Vec<usize>) =
        (0..viewpoints.len()).partition(|&i| from_start.reachable(i + 1));
    // Node 0 is the start; node k is reach[k - 1].
    let nodes: Vec<usize> = std::iter::once(0).chain(reach.iter().map(|i| i + 1)).collect();
    let trees: Vec<_> = nodes.iter().map(|&v| g.shortest_paths(v)).collect();
    let cost: Vec<Vec<f64>> = trees.iter().map(|t| nodes.iter().map(|&v| t.dist[v]).collect()).collect();
    let order_nodes = open_tour(&cost);

    let mut ids = vec![0];
    let mut prev = 0;
    for &k in &order_nodes {
        let leg = trees[prev].path_to(nodes[k]).expect("reachable");
        ids.extend_from_slice(&leg[1..]);
        prev = k;
    }
    let path = g.path(&ids);
    let length = path.length();
    Tour { order: order_nodes.iter().map(|&k| reach[k - 1]).collect(), path, unreachable, length }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use crate::map::MapParams;
    use proptest::prelude::*;

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let x = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    fn euclid(points: &[Vec3]) -> Vec<Vec<f64>> {
        points.iter().map(|a| points.iter().map(|b| (a - b).norm()).collect()).collect()
    }

    pub(crate) fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let rest: Vec<usize> = (1..cost.len()).collect();
        permutations(&rest).iter().map(|p| tour_cost(cost, p)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn triangle_is_optimal() {
        let pts = [Vec3::zeros(), Vec3::new(4.0, 0.0, 0.0), Vec3::new(1.0, 3.0, 0.0), Vec3::new(3.0, 1.0, 0.0)];
        let c = euclid(&pts);
        let t = open_tour(&c);
        assert!((tour_cost(&c, &t) - brute_force(&c)).abs() < 1e-9);
        let mut sorted = t.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3]);
    }

    proptest! {
        #[test]
        fn three_point_instances_optimal(pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 4)) {
            let p: Vec<Vec3> = pts.iter().map(|(x, y)| Vec3::new(*x, *y, 0.0)).collect();
            let c = euclid(&p);
            prop_assert!((tour_cost(&c, &open_tour(&c)) - brute_force(&c)).abs() < 1e-9);
        }

        #[test]
        fn visits_each_once(pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..10)) {
            let p: Vec<Vec3> = pts.iter().map(|(x, y)| Vec3::new(*x, *y, 0.0)).collect();
            let mut t = open_tour(&euclid(&p));
            t.sort();
            prop_assert_eq!(t, (1..p.len()).collect::<Vec<_>>());
        }
    }

    fn walled_room() -> OccupancyMap {
        let mut m = OccupancyMap::new(Grid::new(Vec3::zeros(), 0.2, [40, 30, 12]), MapParams::default()).unwrap();
        for v in m.grid().iter().collect::<Vec<_>>() {
            let edge = v.x == 0 || v.y == 0 || v.z == 0 || v.x == 39 || v.y == 29 || v.z == 11;
            // Partition wall with a gap at high y.
            let wall = v.x == 20 && v.y < 20;
            m.set_log_odds(v, if edge || wall { 3.5 } else { -3.5 });
        }
        m
    }

    #[test]
    fn tour_is_collision_free_and_complete() {
        let m = walled_room();
        let start = Pose::from_xyz_yaw(1.0, 1.0, 1.2, 0.0);
        let vps = [
            Pose::from_xyz_yaw(7.0, 1.0, 1.2, 0.0),
            Pose::from_xyz_yaw(1.5, 3.0, 1.0, 0.0),
            Pose::from_xyz_yaw(3.0, 4.5, 1.3, 0.0),
        ];
        let t = connect_and_tour(&vps, &start, &m, &TourParams::default());
        assert!(t.unreachable.is_empty());
        let mut o = t.order.clone();
        o.sort();
        assert_eq!(o, vec![0, 1, 2]);
        let pts: Vec<Vec3> = t.path.waypoints.iter().map(|w| w.position).collect();
        for w in pts.windows(2) {
            assert!(segment_is_free(&m, &RobotBox::planning(), &w[0], &w[1]));
        }
        // The far viewpoint sits behind the partition, so the path detours.
        assert!(t.length > 9.0);
        for (k, vp) in t.order.iter().enumerate() {
            assert!(pts.iter().any(|p| (p - vps[*vp].position).norm() < 1e-12), "viewpoint {k} on path");
        }
    }

    #[test]
    fn single_viewpoint_and_unreachable() {
        let mut m = walled_room();
        // Seal the gap so the far side is cut off.
        for v in m.grid().iter().collect::<Vec<_>>() {
            if v.x == 20 {
                m.set_log_odds(v, 3.5);
            }
        }
        let start = Pose::from_xyz_yaw(1.0, 1.0, 1.2, 0.0);
        let vps = [Pose::from_xyz_yaw(3.0, 1.0, 1.2, 0.0), Pose::from_xyz_yaw(7.0, 1.0, 1.2, 0.0)];
        let t = connect_and_tour(&vps, &start, &m, &TourParams::default());
        assert_eq!(t.order, vec![0]);
        assert_eq!(t.unreachable, vec![1]);
        assert!((t.length - 2.0).abs() < 1e-9);
    }
}
