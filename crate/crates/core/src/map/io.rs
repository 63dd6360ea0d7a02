use crate::codec::{read_runs, write_runs, CodecError, Reader, Writer};
use crate::geometry::{Grid, Vec3};

use super::{MapError, MapParams, Occupancy, OccupancyMap};

pub const MAP_MAGIC: [u8; 4] = *b"OCMP";
pub const MAP_VERSION: u16 = 1;

fn class_code(c: Occupancy) -> u8 {
    match c {
        Occupancy::Unknown => 0,
        Occupancy::Free => 1,
        Occupancy::Occupied => 2,
    }
}

/// Serializes the lattice, parameters, a run-length classification layer
/// and a run-length log-odds layer, followed by a CRC-32.
pub fn write_map(map: &OccupancyMap) -> Vec<u8> {
    let g = map.grid();
    let p = map.params();
    let mut w = Writer::new();
    w.bytes(&MAP_MAGIC);
    w.u16(MAP_VERSION);
    w.f64(g.resolution);
    for e in g.extents {
        w.u32(e as u32);
    }
    for i in 0..3 {
        w.f64(g.origin[i]);
    }
    for v in [p.l_occ, p.l_free, p.l_min, p.l_max, p.occ_threshold, p.free_threshold] {
        w.f64(v);
    }
    write_runs(&mut w, g.iter().map(|v| class_code(map.classify(v))), |w, c| w.u8(c));
    let nan = f32::NAN.to_bits();
    write_runs(
        &mut w,
        g.iter().map(|v| map.log_odds(v).map_or(nan, f32::to_bits)),
        |w, b| w.u32(b),
    );
    w.finish_with_crc()
}

pub fn read_map(bytes: &[u8]) -> Result<OccupancyMap, MapError> {
    let mut r = Reader::with_crc(bytes)?;
    r.magic(MAP_MAGIC)?;
    r.version(MAP_VERSION)?;
    let res = r.f64()?;
    let ext = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let params = MapParams {
        l_occ: r.f64()?,
        l_free: r.f64()?,
        l_min: r.f64()?,
        l_max: r.f64()?,
        occ_threshold: r.f64()?,
        free_threshold: r.f64()?,
    };
    if !(res > 0.0) || ext.contains(&0) {
        return Err(CodecError::Invalid("empty lattice".into()).into());
    }
    let grid = Grid::new(origin, res, ext);
    let mut map = OccupancyMap::new(grid, params)?;
    let classes = read_runs(&mut r, grid.len(), |r| r.u8())?;
    let values = read_runs(&mut r, grid.len(), |r| r.u32())?;
    for (i, bits) in values.into_iter().enumerate() {
        let v = f32::from_bits(bits);
        if !v.is_nan() {
            map.set_log_odds(grid.from_linear(i), v as f64);
        }
    }
    for (i, c) in classes.into_iter().enumerate() {
        if class_code(map.classify(grid.from_linear(i))) != c {
            return Err(CodecError::Invalid(format!("classification layer disagrees at voxel {i}")).into());
        }
    }
    if !r.is_empty() {
        return Err(CodecError::Invalid("trailing bytes".into()).into());
    }
    Ok(map)
}
