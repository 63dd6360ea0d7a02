use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{VoxelWorld, WorldError};
use crate::geometry::{Aabb, Pose, Vec3};

/// Minimum lattice size on every axis for a generated scenario.
const MIN_VOXELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    EmptyRoom,
    TunnelNetwork,
    ClosedTank,
    ClutteredRoom,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::EmptyRoom => "empty_room",
            Generator::TunnelNetwork => "tunnel_network",
            Generator::ClosedTank => "closed_tank",
            Generator::ClutteredRoom => "cluttered_room",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "empty_room" => Ok(Generator::EmptyRoom),
            "tunnel_network" => Ok(Generator::TunnelNetwork),
            "closed_tank" => Ok(Generator::ClosedTank),
            "cluttered_room" => Ok(Generator::ClutteredRoom),
            other => Err(WorldError::UnknownGenerator(other.to_string())),
        }
    }
}

/// Scenario descriptor: generator name, seed, metric dimensions and voxel size.
///
/// Text form is one `key = value` pair per line; `#` starts a comment.
///
/// ```text
/// generator = tunnel_network
/// seed = 7
/// dims = 20 20 3
/// resolution = 0.2
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub generator: String,
    #[serde(default)]
    pub seed: u64,
    pub dims: [f64; 3],
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    0.2
}

impl ScenarioDescriptor {
    pub fn new(generator: Generator, seed: u64, dims: [f64; 3], resolution: f64) -> Self {
        Self { generator: generator.name().to_string(), seed, dims, resolution }
    }

    /// The bundled scenarios used by the mission acceptance runs.
    pub fn bundled(generator: Generator) -> Self {
        match generator {
            Generator::EmptyRoom => Self::new(generator, 0, [8.0, 8.0, 3.0], 0.2),
            Generator::TunnelNetwork => Self::new(generator, 7, [20.0, 20.0, 3.0], 0.2),
            Generator::ClosedTank => Self::new(generator, 1, [10.0, 8.0, 4.4], 0.2),
            Generator::ClutteredRoom => Self::new(generator, 3, [10.0, 8.0, 3.0], 0.2),
        }
    }

    pub fn parse(text: &str) -> Result<Self, WorldError> {
        let mut generator = None;
        let mut seed = 0;
        let mut dims = None;
        let mut resolution = default_resolution();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| WorldError::Descriptor { line: n + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "generator" => generator = Some(value.to_string()),
                "seed" => seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
                "resolution" => {
                    resolution = value.parse().map_err(|e| err(format!("resolution: {e}")))?
                }
                "dims" => {
                    let parts: Vec<f64> = value
                        .split(|c: char| c.is_whitespace() || c == 'x' || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|e| err(format!("dims: {e}")))?;
                    let [x, y, z] = parts[..] else {
                        return Err(err(format!("dims needs 3 values, got {}", parts.len())));
                    };
                    dims = Some([x, y, z]);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let generator = generator
            .ok_or(WorldError::Descriptor { line: 0, message: "missing `generator`".into() })?;
        let dims =
            dims.ok_or(WorldError::Descriptor { line: 0, message: "missing `dims`".into() })?;
        Ok(Self { generator, seed, dims, resolution })
    }

    pub fn to_text(&self) -> String {
        format!(
            "generator = {}\nseed = {}\ndims = {} {} {}\nresolution = {}\n",
            self.generator, self.seed, self.dims[0], self.dims[1], self.dims[2], self.resolution
        )
    }

    pub fn extents(&self) -> Result<[usize; 3], WorldError> {
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(WorldError::InvalidResolution(self.resolution));
        }
        let e = self.dims.map(|d| (d / self.resolution).round().max(0.0) as usize);
        if e.iter().any(|&n| n < MIN_VOXELS) {
            return Err(WorldError::InvalidExtents { extents: e, min: MIN_VOXELS });
        }
        Ok(e)
    }
}

/// Builds a deterministic world for `(generator, seed, dims, resolution)`.
/// Every free region the generator declares is 6-connected to the start voxel.
pub fn build_scenario(desc: &ScenarioDescriptor) -> Result<VoxelWorld, WorldError> {
    let generator: Generator = desc.generator.parse()?;
    let extents = desc.extents()?;
    let res = desc.resolution;
    let size = extents.map(|e| e as f64 * res);
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed ^ 0x5eed_0fc0_ffee);
    // Start poses sit slightly off voxel boundaries so sensor rays avoid exact lattice ties.
    let jitter = Vec3::new(0.0131, 0.0077, 0.0113) * res;

    let mut world = match generator {
        Generator::EmptyRoom => {
            let start = Vec3::new(size[0] / 2.0, size[1] / 2.0, (size[2] / 2.0).min(1.2));
            VoxelWorld::new(res, extents, Pose::new(snap(start, res) + jitter, 0.0))?
        }
        Generator::TunnelNetwork => tunnel_network(res, extents, size, &mut rng, jitter)?,
        Generator::ClosedTank => closed_tank(res, extents, size, &mut rng, jitter)?,
        Generator::ClutteredRoom => cluttered_room(res, extents, size, &mut rng, jitter)?,
    };
    close_unreachable(&mut world);
    world.check_start()?;
    Ok(world)
}

/// Voxel center nearest to `p`.
fn snap(p: Vec3, res: f64) -> Vec3 {
    p.map(|c| ((c / res).floor() + 0.5) * res)
}

/// Fills every free voxel not connected to the start.
fn close_unreachable(world: &mut VoxelWorld) {
    let reach = world.reachable_free();
    let grid = *world.grid();
    for (i, reached) in reach.iter().enumerate() {
        if !reached {
            world.set(grid.from_linear(i), true);
        }
    }
}

fn solid(res: f64, extents: [usize; 3]) -> Result<VoxelWorld, WorldError> {
    let grid = crate::geometry::Grid::new(Vec3::zeros(), res, extents);
    Ok(VoxelWorld {
        grid,
        occupancy: vec![true; grid.len()],
        start_pose: Pose::identity(),
        goal: None,
    })
}

/// Free interior with only the boundary layer occupied; start pose unset.
fn sealed_empty(res: f64, extents: [usize; 3]) -> Result<VoxelWorld, WorldError> {
    let mut world = solid(res, extents)?;
    world.occupancy.iter_mut().for_each(|o| *o = false);
    world.seal();
    Ok(world)
}

/// Maze of corridors carved out of solid rock on a coarse cell lattice.
fn tunnel_network(
    res: f64,
    extents: [usize; 3],
    size: [f64; 3],
    rng: &mut ChaCha8Rng,
    jitter: Vec3,
) -> Result<VoxelWorld, WorldError> {
    const CELL: f64 = 4.0;
    const WIDTH: f64 = 2.0;
    let mut world = solid(res, extents)?;
    let margin = res;
    let nx = (((size[0] - 2.0 * margin) / CELL).floor() as usize).max(1);
    let ny = (((size[1] - 2.0 * margin) / CELL).floor() as usize).max(1);
    let z_lo = res;
    let z_hi = size[2] - res;
    let center = |i: usize, j: usize| {
        Vec3::new(margin + (i as f64 + 0.5) * CELL, margin + (j as f64 + 0.5) * CELL, 0.0)
    };
    let half = (WIDTH / 2.0).min((size[0].min(size[1]) - 2.0 * margin) / 2.0 - 1e-9);
    let carve = |world: &mut VoxelWorld, a: Vec3, b: Vec3| {
        let min = Vec3::new(a.x.min(b.x) - half, a.y.min(b.y) - half, z_lo);
        let max = Vec3::new(a.x.max(b.x) + half, a.y.max(b.y) + half, z_hi);
        world.fill_box(&Aabb::new(min, max), false);
    };

    // Randomized depth-first spanning tree over cells, plus a few loop closures.
    let mut visited = vec![false; nx * ny];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    carve(&mut world, center(0, 0), center(0, 0));
    let mut non_tree = Vec::new();
    while let Some(&(i, j)) = stack.last() {
        let mut options = Vec::new();
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny {
                let (ni, nj) = (ni as usize, nj as usize);
                if !visited[nj * nx + ni] {
                    options.push((ni, nj));
                } else if (ni, nj) > (i, j) {
                    non_tree.push(((i, j), (ni, nj)));
                }
            }
        }
        if options.is_empty() {
            stack.pop();
            continue;
        }
        let (ni, nj) = options[rng.random_range(0..options.len())];
        visited[nj * nx + ni] = true;
        carve(&mut world, center(i, j), center(ni, nj));
        stack.push((ni, nj));
    }
    non_tree.sort();
    non_tree.dedup();
    for (a, b) in non_tree {
        if rng.random_bool(0.15) {
            carve(&mut world, center(a.0, a.1), center(b.0, b.1));
        }
    }
    world.seal();
    let start = center(0, 0) + Vec3::new(0.0, 0.0, (z_lo + z_hi) / 2.0);
    world.set_start_pose(Pose::new(snap(start, res) + jitter, 0.0));
    Ok(world)
}

/// Closed tank with transverse web frames protruding from one side wall.
fn closed_tank(
    res: f64,
    extents: [usize; 3],
    size: [f64; 3],
    rng: &mut ChaCha8Rng,
    jitter: Vec3,
) -> Result<VoxelWorld, WorldError> {
    let mut world = sealed_empty(res, extents)?;
    let thickness = 2.0 * res;
    let depth = size[1] * rng.random_range(0.35..0.45);
    for frac in [1.0 / 3.0, 2.0 / 3.0] {
        let x = size[0] * frac + rng.random_range(-0.3..0.3);
        let x = (x / res).round() * res;
        world.fill_box(
            &Aabb::new(Vec3::new(x, 0.0, 0.0), Vec3::new(x + thickness, depth, size[2])),
            true,
        );
    }
    let start = Vec3::new(1.2, size[1] * 0.75, 1.4_f64.min(size[2] / 2.0));
    world.set_start_pose(Pose::new(snap(start, res) + jitter, 0.0));
    Ok(world)
}

/// Room with vertical pillars and low crates; navigation goal on the far side.
fn cluttered_room(
    res: f64,
    extents: [usize; 3],
    size: [f64; 3],
    rng: &mut ChaCha8Rng,
    jitter: Vec3,
) -> Result<VoxelWorld, WorldError> {
    let mut world = sealed_empty(res, extents)?;
    let flight_z = 1.5_f64.min(size[2] / 2.0);
    let start = Vec3::new(1.5_f64.min(size[0] / 4.0), size[1] / 2.0, flight_z);
    let goal = Vec3::new(size[0] - start.x, size[1] / 2.0, flight_z);
    let keep_clear = 1.6;
    let min_gap = 1.3;

    let mut placed: Vec<Aabb> = Vec::new();
    let area = (size[0] - 2.0) * (size[1] - 2.0);
    let target = ((area / 9.0).round() as usize).max(1);
    let mut attempts = 0;
    while placed.len() < target && attempts < 400 {
        attempts += 1;
        let w = rng.random_range(0.4..0.8);
        let d = rng.random_range(0.4..0.8);
        let low_crate = rng.random_bool(0.25);
        let h = if low_crate { rng.random_range(0.4..0.8) } else { size[2] };
        let lo_x = 0.6;
        let hi_x = size[0] - 0.6 - w;
        let lo_y = 0.6;
        let hi_y = size[1] - 0.6 - d;
        if hi_x <= lo_x || hi_y <= lo_y {
            break;
        }
        let x = rng.random_range(lo_x..hi_x);
        let y = rng.random_range(lo_y..hi_y);
        let b = Aabb::new(Vec3::new(x, y, 0.0), Vec3::new(x + w, y + d, h));
        let clear_of = |p: &Vec3| {
            let dx = (p.x - p.x.clamp(b.min.x, b.max.x)).abs();
            let dy = (p.y - p.y.clamp(b.min.y, b.max.y)).abs();
            dx.hypot(dy) > keep_clear
        };
        let spaced = placed.iter().all(|o| {
            let gx = (o.min.x - b.max.x).max(b.min.x - o.max.x);
            let gy = (o.min.y - b.max.y).max(b.min.y - o.max.y);
            gx.max(gy) > min_gap
        });
        if clear_of(&start) && clear_of(&goal) && spaced {
            placed.push(b);
        }
    }
    for b in &placed {
        world.fill_box(b, true);
    }
    world.seal();
    world.set_start_pose(Pose::new(snap(start, res) + jitter, 0.0));
    world.set_goal(Some(snap(goal, res) + jitter));
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_descriptor_text() {
        let text = "# demo\ngenerator = tunnel_network\nseed = 7\ndims = 20 20 3\nresolution = 0.25\n";
        let d = ScenarioDescriptor::parse(text).unwrap();
        assert_eq!(d.generator, "tunnel_network");
        assert_eq!(d.seed, 7);
        assert_eq!(d.dims, [20.0, 20.0, 3.0]);
        assert_eq!(d.resolution, 0.25);
        assert_eq!(ScenarioDescriptor::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            ScenarioDescriptor::parse("generator = x\ndims = 1 2"),
            Err(WorldError::Descriptor { line: 2, .. })
        ));
        assert!(ScenarioDescriptor::parse("dims = 1 2 3").is_err());
        assert!(ScenarioDescriptor::parse("generator = a\ndims = 1 2 3\ncolour = red").is_err());
    }

    #[test]
    fn rejects_unknown_generator_and_tiny_dims() {
        let bad = ScenarioDescriptor {
            generator: "volcano".into(),
            seed: 0,
            dims: [5.0, 5.0, 5.0],
            resolution: 0.2,
        };
        assert!(matches!(build_scenario(&bad), Err(WorldError::UnknownGenerator(_))));
        let tiny = ScenarioDescriptor::new(Generator::EmptyRoom, 0, [0.4, 5.0, 5.0], 0.2);
        assert!(matches!(build_scenario(&tiny), Err(WorldError::InvalidExtents { .. })));
    }

    #[test]
    fn empty_room_is_boundary_only() {
        let d = ScenarioDescriptor::new(Generator::EmptyRoom, 0, [10.0, 10.0, 3.0], 0.2);
        let w = build_scenario(&d).unwrap();
        assert_eq!(w.extents(), [50, 50, 15]);
        let grid = *w.grid();
        for v in grid.iter() {
            let [nx, ny, nz] = grid.extents;
            let boundary = v.x == 0
                || v.y == 0
                || v.z == 0
                || v.x as usize == nx - 1
                || v.y as usize == ny - 1
                || v.z as usize == nz - 1;
            assert_eq!(w.is_occupied(v), boundary);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for g in [Generator::TunnelNetwork, Generator::ClosedTank, Generator::ClutteredRoom] {
            let d = ScenarioDescriptor::bundled(g);
            assert_eq!(build_scenario(&d).unwrap(), build_scenario(&d).unwrap(), "{g}");
        }
    }

    #[test]
    fn seeds_change_layout() {
        let a = build_scenario(&ScenarioDescriptor::new(Generator::TunnelNetwork, 1, [20.0, 20.0, 3.0], 0.2)).unwrap();
        let b = build_scenario(&ScenarioDescriptor::new(Generator::TunnelNetwork, 2, [20.0, 20.0, 3.0], 0.2)).unwrap();
        assert_ne!(a.occupancy(), b.occupancy());
    }

    /// Independent flood fill: every free voxel must be reachable from the start.
    fn all_free_reachable(w: &VoxelWorld) -> bool {
        let grid = *w.grid();
        let start = grid.voxel_of(&w.start_pose().position);
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for n in v.face_neighbors() {
                if !w.is_occupied(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        let free = grid.iter().filter(|v| !w.is_occupied(*v)).count();
        free == seen.len() && free > 0
    }

    #[test]
    fn cluttered_room_connected() {
        let w = build_scenario(&ScenarioDescriptor::bundled(Generator::ClutteredRoom)).unwrap();
        assert!(all_free_reachable(&w));
        assert!(w.goal().is_some());
        assert!(w.occupied_count() > 2 * (50 * 40 + 50 * 15 + 40 * 15));
    }

    #[test]
    fn tunnel_and_tank_connected() {
        for g in [Generator::TunnelNetwork, Generator::ClosedTank, Generator::EmptyRoom] {
            let w = build_scenario(&ScenarioDescriptor::bundled(g)).unwrap();
            assert!(all_free_reachable(&w), "{g}");
        }
    }
}
