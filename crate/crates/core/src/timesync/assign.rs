use serde::{Deserialize, Serialize};

use super::{SyncError, TriggerBuffer, TriggerEntry};

/// Expected lag between a trigger pulse and the frame's host arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureProfile {
    pub exposure: f64,
    pub processing_delay: f64,
    /// Largest accepted |arrival - predicted arrival|.
    pub tolerance: f64,
}

impl ExposureProfile {
    pub fn new(exposure: f64, processing_delay: f64, tolerance: f64) -> Result<Self, SyncError> {
        for (name, v) in [("exposure", exposure), ("processing delay", processing_delay)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SyncError::InvalidProfile(format!("{name} {v}")));
            }
        }
        if !(tolerance > 0.0) || !tolerance.is_finite() {
            return Err(SyncError::InvalidProfile(format!("tolerance {tolerance}")));
        }
        Ok(Self { exposure, processing_delay, tolerance })
    }

    /// Tolerance of 40% of the trigger period.
    pub fn for_period(exposure: f64, processing_delay: f64, trigger_period: f64) -> Result<Self, SyncError> {
        Self::new(exposure, processing_delay, 0.4 * trigger_period)
    }

    /// Rejects profiles whose tolerance window could admit two consecutive pulses.
    pub fn validate_for_period(&self, trigger_period: f64) -> Result<(), SyncError> {
        if self.tolerance >= 0.5 * trigger_period {
            return Err(SyncError::InvalidProfile(format!(
                "tolerance {} not below half the trigger period {}",
                self.tolerance, trigger_period
            )));
        }
        Ok(())
    }

    pub fn latency(&self) -> f64 {
        self.exposure + self.processing_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignedFrame {
    pub frame: usize,
    pub seq: u64,
    /// Host timestamp of the matched trigger pulse.
    pub corrected_timestamp: f64,
    /// Arrival minus predicted arrival.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted by frame index.
    pub assigned: Vec<AssignedFrame>,
    pub unassigned: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self) -> f64 {
        self.assigned.iter().map(|a| a.residual.abs()).sum()
    }
}

/// Matches frame arrivals to trigger pulses. Among all injective matchings
/// using only pairs within tolerance, the result has maximum cardinality
/// and, among those, minimum total |residual|.
pub fn assign_frames_to_triggers(
    arrivals: &[f64],
    buffer: &TriggerBuffer,
    profile: &ExposureProfile,
) -> Result<Assignment, SyncError> {
    if buffer.is_empty() {
        return Err(SyncError::EmptyBuffer);
    }
    Ok(assign_entries(arrivals, &buffer.entries(), profile, |_| false))
}

pub(crate) fn assign_entries(
    arrivals: &[f64],
    entries: &[TriggerEntry],
    profile: &ExposureProfile,
    excluded: impl Fn(u64) -> bool,
) -> Assignment {
    let lat = profile.latency();
    let tol = profile.tolerance;
    let nf = arrivals.len();

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (f, &a) in arrivals.iter().enumerate() {
        if !a.is_finite() {
            continue;
        }
        let lo = entries.partition_point(|e| e.timestamp + lat < a - tol);
        for (t, e) in entries.iter().enumerate().skip(lo) {
            let r = a - (e.timestamp + lat);
            if r < -tol {
                break;
            }
            if r.abs() <= tol && !excluded(e.seq) {
                edges.push((f, t, r));
            }
        }
    }

    // Connected components of the tolerance graph solve independently.
    let mut uf = UnionFind::new(nf + entries.len());
    for &(f, t, _) in &edges {
        uf.union(f, nf + t);
    }
    let mut comp_edges: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
    for &e in &edges {
        comp_edges.entry(uf.find(e.0)).or_default().push(e);
    }

    let mut assigned = Vec::new();
    for (_, ce) in comp_edges {
        let mut frames: Vec<usize> = ce.iter().map(|e| e.0).collect();
        frames.sort_unstable();
        frames.dedup();
        let mut trigs: Vec<usize> = ce.iter().map(|e| e.1).collect();
        trigs.sort_unstable();
        trigs.dedup();
        let k = frames.len().max(trigs.len());
        let big = 2.0 * tol * (k as f64 + 1.0) + 1.0;
        let mut cost = vec![vec![big; k]; k];
        for &(f, t, r) in &ce {
            let i = frames.binary_search(&f).unwrap();
            let j = trigs.binary_search(&t).unwrap();
            cost[i][j] = r.abs();
        }
        let sol = hungarian(&cost);
        for (i, &j) in sol.iter().enumerate() {
            if i < frames.len() && j < trigs.len() && cost[i][j] < big {
                let e = entries[trigs[j]];
                let r = arrivals[frames[i]] - (e.timestamp + lat);
                assigned.push(AssignedFrame {
                    frame: frames[i],
                    seq: e.seq,
                    corrected_timestamp: e.timestamp,
                    residual: r,
                });
            }
        }
    }
    assigned.sort_by_key(|a| a.frame);
    let mut matched = vec![false; nf];
    for a in &assigned {
        matched[a.frame] = true;
    }
    let unassigned = (0..nf).filter(|&f| !matched[f]).collect();
    Assignment { assigned, unassigned }
}

/// Minimum-cost perfect matching on a square cost matrix. Returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
