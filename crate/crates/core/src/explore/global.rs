use serde::{Deserialize, Serialize};

use crate::collision::{segment_is_free, RobotBox};
use crate::geometry::{Pose, Vec3};
use crate::graph::{Path, PlanGraph};
use crate::map::OccupancyMap;

use super::gain::{exploration_gain, GainParams};
use super::ExploreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// Local vertices within this distance of a global vertex reuse it.
    pub dedup_radius: f64,
    /// Longest edge tried when a new vertex cannot link to its predecessor.
    pub max_link: f64,
    /// Frontier candidates kept per update.
    pub candidates_per_update: usize,
    /// Gains at or below this are treated as exhausted.
    pub min_gain: f64,
    pub robot: RobotBox,
    pub gain: GainParams,
}

impl Default for GlobalParams {
    fn default() -> Self {
        Self {
            dedup_radius: 0.5,
            max_link: 1.6,
            candidates_per_update: 4,
            min_gain: 10.0,
            robot: RobotBox::planning(),
            gain: GainParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub vertex: usize,
    pub gain: f64,
}

/// Sparse graph of visited places rooted at the mission start.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGraph {
    pub graph: PlanGraph,
    /// Vertex the robot last reached.
    pub current: usize,
    pub candidates: Vec<Candidate>,
    pub params: GlobalParams,
}

impl GlobalGraph {
    pub fn new(start: &Pose, params: GlobalParams) -> Self {
        Self { graph: PlanGraph::new(start.position, start.yaw), current: 0, candidates: Vec::new(), params }
    }

    pub fn start(&self) -> usize {
        self.graph.root()
    }

    fn reusable(&self, map: &OccupancyMap, prev: Option<usize>, p: &Vec3) -> Option<usize> {
        let g = &self.graph;
        let mut near: Vec<(usize, f64)> = (0..g.len())
            .map(|i| (i, (g.position(i) - p).norm()))
            .filter(|(_, d)| *d <= self.params.dedup_radius)
            .collect();
        near.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        near.into_iter().map(|(i, _)| i).find(|&i| match prev {
            None => segment_is_free(map, &self.params.robot, p, &g.position(i)),
            Some(q) => q == i || segment_is_free(map, &self.params.robot, &g.position(q), &g.position(i)),
        })
    }

    /// Adds `p` after `prev`, reusing a nearby vertex when possible. Returns
    /// `None` if no collision-free link to the existing graph was found.
    fn insert(&mut self, map: &OccupancyMap, prev: Option<usize>, p: &Vec3, yaw: f64) -> Option<usize> {
        if let Some(i) = self.reusable(map, prev, p) {
            return Some(i);
        }
        let robot = self.params.robot;
        let g = &self.graph;
        let mut links: Vec<(usize, f64)> = Vec::new();
        if let Some(q) = prev {
            if segment_is_free(map, &robot, &g.position(q), p) {
                links.push((q, 0.0));
            }
        }
        if links.is_empty() {
            let mut near: Vec<(usize, f64)> = (0..g.len())
                .map(|i| (i, (g.position(i) - p).norm()))
                .filter(|(_, d)| *d <= self.params.max_link)
                .collect();
            near.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            links.extend(near.into_iter().find(|(i, _)| segment_is_free(map, &robot, &g.position(*i), p)));
        }
        let (q, _) = *links.first()?;
        let id = self.graph.add_vertex(*p, yaw);
        self.graph.add_edge(q, id).expect("valid ids");
        Some(id)
    }

    /// Inserts a chain of local vertices, linking each to the previous.
    /// Returns the global id of every inserted element, or `None` where the
    /// chain broke.
    fn insert_chain(&mut self, map: &OccupancyMap, local: &PlanGraph, chain: &[usize]) -> Vec<Option<usize>> {
        let mut prev = None;
        let mut out = Vec::with_capacity(chain.len());
        for (k, &v) in chain.iter().enumerate() {
            let vert = local.vertex(v);
            let id = self.insert(map, if k == 0 { None } else { prev }, &vert.position, vert.yaw);
            if let (Some(a), Some(b)) = (prev, id) {
                if a != b
                    && !self.graph.has_edge(a, b)
                    && segment_is_free(map, &self.params.robot, &self.graph.position(a), &self.graph.position(b))
                {
                    self.graph.add_edge(a, b).expect("valid ids");
                }
            }
            if id.is_some() {
                prev = id;
            }
            out.push(id);
        }
        out
    }
}

/// Appends the executed path and the best unvisited local vertices to the
/// global graph. Every vertex added is linked to an existing one by a
/// collision-free edge, so the graph stays connected to the start.
pub fn update_global_graph(
    global: &mut GlobalGraph,
    local: &PlanGraph,
    executed: &[usize],
    gains: &[f64],
    map: &OccupancyMap,
) {
    let ids = global.insert_chain(map, local, executed);
    if let Some(last) = ids.iter().rev().flatten().next() {
        global.current = *last;
    }
    let visited: Vec<Vec3> = executed.iter().map(|&v| local.position(v)).collect();
    let radius = global.params.dedup_radius;
    let graph = &global.graph;
    global.candidates.retain(|c| visited.iter().all(|p| (graph.position(c.vertex) - p).norm() > radius));

    let mut ranked: Vec<usize> = (0..local.len())
        .filter(|v| !executed.contains(v))
        .filter(|&v| gains.get(v).copied().unwrap_or(0.0) > global.params.min_gain)
        .collect();
    ranked.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    ranked.truncate(global.params.candidates_per_update);
    let sp = local.shortest_paths(local.root());
    for v in ranked {
        let Some(chain) = sp.path_to(v) else { continue };
        let Some(Some(id)) = global.insert_chain(map, local, &chain).last().copied() else { continue };
        if id == global.current || global.graph.position(id) == local.position(local.root()) {
            continue;
        }
        match global.candidates.iter_mut().find(|c| c.vertex == id) {
            Some(c) => c.gain = gains[v],
            None => global.candidates.push(Candidate { vertex: id, gain: gains[v] }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Repositioning {
    Path { vertices: Vec<usize>, path: Path, target: usize, gain: f64 },
    Exhausted,
}

/// Re-scores every candidate against `map`, drops spent ones, and returns
/// the shortest global path to the best survivor.
pub fn plan_repositioning(global: &mut GlobalGraph, map: &OccupancyMap) -> Repositioning {
    let params = global.params.clone();
    let graph = &global.graph;
    for c in global.candidates.iter_mut() {
        let v = graph.vertex(c.vertex);
        c.gain = exploration_gain(map, &Pose::new(v.position, v.yaw), &params.gain);
    }
    global.candidates.retain(|c| c.gain > params.min_gain);
    let sp = graph.shortest_paths(global.current);
    let best = global
        .candidates
        .iter()
        .filter(|c| sp.reachable(c.vertex) && c.vertex != global.current)
        .max_by(|a, b| a.gain.total_cmp(&b.gain).then(b.vertex.cmp(&a.vertex)));
    match best {
        None => Repositioning::Exhausted,
        Some(c) => {
            let vertices = sp.path_to(c.vertex).expect("reachable");
            Repositioning::Path { path: graph.path(&vertices), vertices, target: c.vertex, gain: c.gain }
        }
    }
}

/// Shortest global path from `from` to the mission start.
pub fn plan_homing(global: &GlobalGraph, from: usize) -> Result<(Vec<usize>, Path), ExploreError> {
    let g = &global.graph;
    if from >= g.len() {
        return Err(ExploreError::UnknownVertex(from));
    }
    let sp = g.shortest_paths(from);
    let ids = sp.path_to(global.start()).ok_or(ExploreError::Disconnected { from })?;
    Ok((ids.clone(), g.path(&ids)))
}
