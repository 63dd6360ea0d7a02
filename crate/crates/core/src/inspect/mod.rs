//! Surface inspection: viewpoints sampled at a standoff from mapped
//! surfaces, reduced to a small covering set and ordered into a tour.

mod cover;
mod surface;
mod tour;
mod viewpoint;

use std::io::Write;

use thiserror::Error;

use crate::geometry::Pose;
use crate::map::OccupancyMap;

pub use cover::{select_cover, Cover};
pub use surface::{extract_surfaces, SurfaceSet, SurfaceVoxel};
pub use tour::{connect_and_tour, open_tour, tour_cost, Tour, TourParams};
pub use viewpoint::{covered_surfaces, facing, is_visible, sample_viewpoints, InspectionParams, Viewpoint, ViewpointSet};

#[derive(Debug, Error, PartialEq)]
pub enum InspectError {
    #[error("standoff {standoff} m does not fit the camera range {range} m")]
    InvalidStandoff { standoff: f64, range: f64 },
    #[error("map holds no surfaces")]
    EmptyMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectionPlan {
    pub surfaces: SurfaceSet,
    pub candidates: ViewpointSet,
    pub cover: Cover,
    /// Selected viewpoints, indexed like `tour.order`.
    pub viewpoints: Vec<Viewpoint>,
    pub tour: Tour,
}

impl InspectionPlan {
    /// Fraction of surfaces covered by a viewpoint the tour actually visits.
    pub fn coverage(&self) -> f64 {
        if self.surfaces.is_empty() {
            return 1.0;
        }
        self.covered_by().iter().filter(|c| c.is_some()).count() as f64 / self.surfaces.len() as f64
    }

    /// Per surface, the index into `viewpoints` of the first visited
    /// viewpoint in cover order that sees it.
    pub fn covered_by(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.surfaces.len()];
        let visited: Vec<bool> = {
            let mut v = vec![false; self.viewpoints.len()];
            self.tour.order.iter().for_each(|&i| v[i] = true);
            v
        };
        for (i, vp) in self.viewpoints.iter().enumerate() {
            if !visited[i] {
                continue;
            }
            for &s in &vp.covered {
                out[s].get_or_insert(i);
            }
        }
        out
    }

    /// `surface_id,x,y,z,covered_by` with `UNCOVERED` for unseen surfaces.
    pub fn write_report<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "surface_id,x,y,z,covered_by")?;
        for (i, c) in self.covered_by().iter().enumerate() {
            let v = self.surfaces.get(i).index;
            match c {
                Some(vp) => writeln!(out, "{i},{},{},{},{vp}", v.x, v.y, v.z)?,
                None => writeln!(out, "{i},{},{},{},UNCOVERED", v.x, v.y, v.z)?,
            }
        }
        Ok(())
    }
}

/// Extract, sample, cover and tour in one call.
pub fn plan_inspection(
    map: &OccupancyMap,
    start: &Pose,
    params: &InspectionParams,
    tour: &TourParams,
) -> Result<InspectionPlan, InspectError> {
    let surfaces = extract_surfaces(map);
    if surfaces.is_empty() {
        return Err(InspectError::EmptyMap);
    }
    let candidates = sample_viewpoints(&surfaces, map, params)?;
    let sets: Vec<&[usize]> = candidates.candidates.iter().map(|c| c.covered.as_slice()).collect();
    let cover = select_cover(&sets, surfaces.len());
    let viewpoints: Vec<Viewpoint> = cover.selected.iter().map(|&i| candidates.candidates[i].clone()).collect();
    let poses: Vec<Pose> = viewpoints.iter().map(|v| v.pose).collect();
    let tour = connect_and_tour(&poses, start, map, tour);
    Ok(InspectionPlan { surfaces, candidates, cover, viewpoints, tour })
}
