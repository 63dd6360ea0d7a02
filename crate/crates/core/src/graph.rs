//! Undirected planning graphs, shortest paths and path export.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("vertex {0} does not exist")]
    NoSuchVertex(usize),
    #[error("vertex {to} unreachable from {from}")]
    Disconnected { from: usize, to: usize },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: Vec3,
    pub yaw: f64,
}

/// Undirected graph with Euclidean edge lengths. Vertex ids are dense
/// indices; vertex 0 need not be the root.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanGraph {
    vertices: Vec<Vertex>,
    adjacency: Vec<Vec<(usize, f64)>>,
    root: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    id: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path tree. Among equal-length predecessors the
/// lowest id wins.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPaths {
    pub fn reachable(&self, v: usize) -> bool {
        self.dist.get(v).is_some_and(|d| d.is_finite())
    }

    /// Vertex sequence from the source to `target`.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.reachable(target) {
            return None;
        }
        let mut out = vec![target];
        let mut cur = target;
        while let Some(p) = self.pred[cur] {
            out.push(p);
            cur = p;
        }
        out.reverse();
        Some(out)
    }
}

impl PlanGraph {
    pub fn new(root_position: Vec3, root_yaw: f64) -> Self {
        Self {
            vertices: vec![Vertex { position: root_position, yaw: root_yaw }],
            adjacency: vec![Vec::new()],
            root: 0,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn set_root(&mut self, id: usize) -> Result<(), GraphError> {
        self.check(id)?;
        self.root = id;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, id: usize) -> &Vertex {
        &self.vertices[id]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn position(&self, id: usize) -> Vec3 {
        self.vertices[id].position
    }

    pub fn neighbors(&self, id: usize) -> &[(usize, f64)] {
        &self.adjacency[id]
    }

    fn check(&self, id: usize) -> Result<(), GraphError> {
        if id < self.vertices.len() {
            Ok(())
        } else {
            Err(GraphError::NoSuchVertex(id))
        }
    }

    pub fn add_vertex(&mut self, position: Vec3, yaw: f64) -> usize {
        self.vertices.push(Vertex { position, yaw: wrap_angle(yaw) });
        self.adjacency.push(Vec::new());
        self.vertices.len() - 1
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.iter().any(|(x, _)| *x == b))
    }

    /// Adds an undirected edge of Euclidean length. Returns false for self
    /// loops and duplicates.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool, GraphError> {
        self.check(a)?;
        self.check(b)?;
        if a == b || self.has_edge(a, b) {
            return Ok(false);
        }
        let len = (self.vertices[a].position - self.vertices[b].position).norm();
        self.adjacency[a].push((b, len));
        self.adjacency[b].push((a, len));
        self.adjacency[a].sort_by_key(|e| e.0);
        self.adjacency[b].sort_by_key(|e| e.0);
        Ok(true)
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        if a < self.len() && b < self.len() {
            self.adjacency[a].retain(|e| e.0 != b);
            self.adjacency[b].retain(|e| e.0 != a);
        }
    }

    /// Undirected edges as `(a, b, length)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, n)| n.iter().filter(move |(b, _)| a < *b).map(move |(b, l)| (a, *b, *l)))
            .collect();
        out.sort_by_key(|e| (e.0, e.1));
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nearest_vertex(&self, p: &Vec3) -> Option<usize> {
        self.vertices
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.position - p).norm().total_cmp(&(b.1.position - p).norm()))
            .map(|(i, _)| i)
    }

    pub fn shortest_paths(&self, source: usize) -> ShortestPaths {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        if source < n {
            dist[source] = 0.0;
            heap.push(HeapItem { dist: 0.0, id: source });
        }
        while let Some(HeapItem { dist: d, id }) = heap.pop() {
            if done[id] {
                continue;
            }
            done[id] = true;
            for &(nb, len) in &self.adjacency[id] {
                let nd = d + len;
                let better = nd < dist[nb] || (nd == dist[nb] && pred[nb].is_some_and(|p| id < p));
                if !done[nb] && better {
                    dist[nb] = nd;
                    pred[nb] = Some(id);
                    heap.push(HeapItem { dist: nd, id: nb });
                }
            }
        }
        ShortestPaths { source, dist, pred }
    }

    /// Vertices reachable from the root.
    pub fn reachable_from_root(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if self.is_empty() {
            return seen;
        }
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(v) = stack.pop() {
            for &(nb, _) in &self.adjacency[v] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        seen
    }

    /// Keeps vertices where `keep` is true (the root is always kept),
    /// renumbering in id order. Returns the old-to-new id map.
    pub fn retain(&mut self, keep: &[bool]) -> Vec<Option<usize>> {
        let mut map = vec![None; self.len()];
        let mut verts = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if keep.get(i).copied().unwrap_or(false) || i == self.root {
                map[i] = Some(verts.len());
                verts.push(*v);
            }
        }
        let mut adj = vec![Vec::new(); verts.len()];
        for (a, n) in self.adjacency.iter().enumerate() {
            if let Some(na) = map[a] {
                for &(b, l) in n {
                    if let Some(nb) = map[b] {
                        adj[na].push((nb, l));
                    }
                }
            }
        }
        self.root = map[self.root].expect("root kept");
        self.vertices = verts;
        self.adjacency = adj;
        map
    }

    /// Drops vertices not connected to the root.
    pub fn prune_unreachable(&mut self) -> Vec<Option<usize>> {
        let keep = self.reachable_from_root();
        self.retain(&keep)
    }

    pub fn path(&self, ids: &[usize]) -> Path {
        Path::new(ids.iter().map(|&i| self.vertices[i]).collect())
    }

    /// Text form: `root <id>`, then `v <id> <x> <y> <z> <yaw>` per vertex and
    /// `e <a> <b>` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "root {}", self.root);
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "v {} {} {} {} {}", i, v.position.x, v.position.y, v.position.z, v.yaw);
        }
        for (a, b, _) in self.edges() {
            let _ = writeln!(s, "e {a} {b}");
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut g = PlanGraph { vertices: Vec::new(), adjacency: Vec::new(), root: 0 };
        let mut root = None;
        for (ln, line) in text.lines().enumerate() {
            let err = |m: &str| GraphError::Parse { line: ln + 1, message: m.into() };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, GraphError> {
                toks.get(i).ok_or_else(|| err("missing field"))?.parse::<f64>().map_err(|_| err("bad number"))
            };
            let idx = |i: usize| -> Result<usize, GraphError> {
                toks.get(i).ok_or_else(|| err("missing field"))?.parse::<usize>().map_err(|_| err("bad id"))
            };
            match toks.first() {
                None => {}
                Some(&"root") => root = Some(idx(1)?),
                Some(&"v") => {
                    if idx(1)? != g.len() {
                        return Err(err("vertex ids must be dense and ordered"));
                    }
                    g.add_vertex(Vec3::new(num(2)?, num(3)?, num(4)?), num(5)?);
                }
                Some(&"e") => {
                    g.add_edge(idx(1)?, idx(2)?).map_err(|_| err("edge to unknown vertex"))?;
                }
                Some(_) => return Err(err("unknown record")),
            }
        }
        let root = root.ok_or(GraphError::Parse { line: 0, message: "missing root".into() })?;
        g.set_root(root)?;
        Ok(g)
    }
}

/// Ordered waypoints with heading.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vertex>,
}

impl Path {
    pub fn new(waypoints: Vec<Vertex>) -> Self {
        Self { waypoints }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        let mut wps: Vec<Vertex> = points.iter().map(|p| Vertex { position: *p, yaw: 0.0 }).collect();
        for i in 0..wps.len() {
            let j = if i + 1 < wps.len() { i + 1 } else { i };
            let k = if j > 0 { j - 1 } else { 0 };
            let d = wps[j].position - wps[k].position;
            if d.x != 0.0 || d.y != 0.0 {
                wps[i].yaw = d.y.atan2(d.x);
            } else if i > 0 {
                wps[i].yaw = wps[i - 1].yaw;
            }
        }
        Self { waypoints: wps }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1].position - w[0].position).norm()).sum()
    }

    pub fn first(&self) -> Option<&Vertex> {
        self.waypoints.first()
    }

    pub fn last(&self) -> Option<&Vertex> {
        self.waypoints.last()
    }

    /// Appends `other`, skipping its first waypoint when it repeats our last.
    pub fn extend(&mut self, other: &Path) {
        let skip = match (self.waypoints.last(), other.waypoints.first()) {
            (Some(a), Some(b)) => ((a.position - b.position).norm() < 1e-9) as usize,
            _ => 0,
        };
        self.waypoints.extend(other.waypoints.iter().skip(skip).copied());
    }

    pub fn max_z(&self) -> f64 {
        self.waypoints.iter().map(|w| w.position.z).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes `x,y,z,yaw,timestamp` rows, timing waypoints at constant `speed`.
    pub fn write_csv<W: Write>(&self, out: W, speed: f64, t0: f64) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "yaw", "timestamp"])?;
        let mut t = t0;
        for (i, wp) in self.waypoints.iter().enumerate() {
            if i > 0 {
                t += (wp.position - self.waypoints[i - 1].position).norm() / speed.max(1e-9);
            }
            w.write_record([
                format!("{:.4}", wp.position.x),
                format!("{:.4}", wp.position.y),
                format!("{:.4}", wp.position.z),
                format!("{:.4}", wp.yaw),
                format!("{:.4}", t),
            ])?;
        }
        w.flush()
    }
}
