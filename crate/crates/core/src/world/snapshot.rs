//! World snapshot file.
//!
//! Layout (little-endian): magic `VXWD`, `u16` version, `f64` resolution,
//! `3 x u32` extents, `3 x f64` origin, start pose as `6 x f64`
//! (x, y, z, roll, pitch, yaw), `u8` goal flag plus `3 x f64` goal,
//! run-length occupancy in linear (x-fastest) order with `u8` values, and a
//! trailing CRC-32 over all preceding bytes.

use super::{VoxelWorld, WorldError};
use crate::codec::{read_runs, write_runs, Reader, Writer};
use crate::geometry::{Grid, Pose, Vec3};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"VXWD";
pub const SNAPSHOT_VERSION: u16 = 1;

pub fn write_snapshot(world: &VoxelWorld) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(&SNAPSHOT_MAGIC);
    w.u16(SNAPSHOT_VERSION);
    let grid = world.grid();
    w.f64(grid.resolution);
    for e in grid.extents {
        w.u32(e as u32);
    }
    for c in grid.origin.iter() {
        w.f64(*c);
    }
    let s = world.start_pose();
    for v in [s.position.x, s.position.y, s.position.z, s.roll, s.pitch, s.yaw] {
        w.f64(v);
    }
    match world.goal() {
        Some(g) => {
            w.u8(1);
            g.iter().for_each(|c| w.f64(*c));
        }
        None => {
            w.u8(0);
            (0..3).for_each(|_| w.f64(0.0));
        }
    }
    write_runs(&mut w, world.occupancy().iter().map(|o| *o as u8), |w, v| w.u8(v));
    w.finish_with_crc()
}

pub fn read_snapshot(bytes: &[u8]) -> Result<VoxelWorld, WorldError> {
    let snap = |e: crate::codec::CodecError| WorldError::Snapshot(e.to_string());
    let mut r = Reader::with_crc(bytes).map_err(snap)?;
    r.magic(SNAPSHOT_MAGIC).map_err(snap)?;
    r.version(SNAPSHOT_VERSION).map_err(snap)?;
    let resolution = r.f64().map_err(snap)?;
    let mut extents = [0usize; 3];
    for e in &mut extents {
        *e = r.u32().map_err(snap)? as usize;
    }
    let mut origin = Vec3::zeros();
    for i in 0..3 {
        origin[i] = r.f64().map_err(snap)?;
    }
    let mut p = [0.0; 6];
    for v in &mut p {
        *v = r.f64().map_err(snap)?;
    }
    let start = Pose { position: Vec3::new(p[0], p[1], p[2]), roll: p[3], pitch: p[4], yaw: p[5] };
    let has_goal = r.u8().map_err(snap)?;
    let g = Vec3::new(r.f64().map_err(snap)?, r.f64().map_err(snap)?, r.f64().map_err(snap)?);
    let grid = Grid::new(origin, resolution, extents);
    let cells = read_runs(&mut r, grid.len(), |r| r.u8()).map_err(snap)?;
    if !r.is_empty() {
        return Err(WorldError::Snapshot("trailing bytes after occupancy".into()));
    }
    let occupancy = cells.into_iter().map(|c| c != 0).collect();
    VoxelWorld::from_parts(grid, occupancy, start, (has_goal != 0).then_some(g))
}
