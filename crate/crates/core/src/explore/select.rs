use crate::graph::PlanGraph;

use super::ExploreError;

#[derive(Debug, Clone, PartialEq)]
pub struct GainedPath {
    /// Root first.
    pub vertices: Vec<usize>,
    /// Distance-discounted gain summed over the path.
    pub exploration_gain: f64,
    pub length: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Best root path among all shortest paths, scored by
/// `sum gain(v) * exp(-lambda * d_root(v))`. A vertex may be reached by
/// several equally short paths, so the score is maximised over the
/// shortest-path DAG rather than a single tree. `None` when no reachable
/// vertex carries gain.
pub fn select_best_path(graph: &PlanGraph, gains: &[f64], lambda: f64) -> Result<Option<GainedPath>, ExploreError> {
    if graph.is_empty() {
        return Err(ExploreError::EmptyGraph);
    }
    if gains.len() != graph.len() {
        return Err(ExploreError::GainCount { gains: gains.len(), vertices: graph.len() });
    }
    let sp = graph.shortest_paths(graph.root());
    let mut order: Vec<usize> = (0..graph.len()).filter(|&v| sp.reachable(v)).collect();
    order.sort_by(|&a, &b| sp.dist[a].total_cmp(&sp.dist[b]).then(a.cmp(&b)));

    let n = graph.len();
    let mut score = vec![f64::NEG_INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for &v in &order {
        let own = gains[v].max(0.0) * (-lambda * sp.dist[v]).exp();
        if v == graph.root() {
            score[v] = own;
            continue;
        }
        let mut best: Option<usize> = None;
        for &(u, w) in graph.neighbors(v) {
            if !sp.reachable(u) || !tied(sp.dist[u] + w, sp.dist[v]) || sp.dist[u] >= sp.dist[v] {
                continue;
            }
            best = match best {
                None => Some(u),
                Some(b) if score[u] > score[b] && !tied(score[u], score[b]) => Some(u),
                Some(b) if tied(score[u], score[b]) && u < b => Some(u),
                keep => keep,
            };
        }
        let u = best.or(sp.pred[v]).expect("reachable vertex has a predecessor");
        score[v] = score[u] + own;
        parent[v] = Some(u);
    }

    let mut winner: Option<usize> = None;
    for &v in &order {
        if score[v] <= 0.0 {
            continue;
        }
        winner = match winner {
            None => Some(v),
            Some(w) if score[v] > score[w] && !tied(score[v], score[w]) => Some(v),
            Some(w) if tied(score[v], score[w]) && (sp.dist[v] < sp.dist[w] || (sp.dist[v] == sp.dist[w] && v < w)) => {
                Some(v)
            }
            keep => keep,
        };
    }
    let Some(end) = winner else { return Ok(None) };
    let mut vertices = vec![end];
    while let Some(p) = parent[*vertices.last().unwrap()] {
        vertices.push(p);
    }
    vertices.reverse();
    Ok(Some(GainedPath { vertices, exploration_gain: score[end], length: sp.dist[end] }))
}
