use std::path::Path;

use crate::map::{read_map, write_map, OccupancyMap};

use super::MissionError;

pub fn save_map(map: &OccupancyMap, path: &Path) -> Result<(), MissionError> {
    std::fs::write(path, write_map(map))?;
    Ok(())
}

/// Reads a map written by [`save_map`], checking version and checksum.
pub fn load_map(path: &Path) -> Result<OccupancyMap, MissionError> {
    Ok(read_map(&std::fs::read(path)?)?)
}
