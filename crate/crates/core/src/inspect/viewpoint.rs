use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{pose_is_free, RobotBox};
use crate::geometry::{for_each_in_range, Aabb, Pose, Vec3, VoxelTraversal};
use crate::map::OccupancyMap;
use crate::world::SensorModel;

use super::surface::{SurfaceSet, SurfaceVoxel};
use super::InspectError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionParams {
    /// Inspection camera; its mount is taken relative to the viewpoint pose.
    pub camera: SensorModel,
    pub standoff: f64,
    /// Accepted distance band as fractions of the standoff.
    pub band: (f64, f64),
    pub max_incidence_deg: f64,
    pub n_per_voxel: usize,
    /// Largest random tilt applied to the normal for extra candidates.
    pub perturb_deg: f64,
    pub robot: RobotBox,
    pub max_height: Option<f64>,
    /// Only sample around surfaces no earlier candidate already covers.
    pub skip_covered: bool,
    pub seed: u64,
}

impl Default for InspectionParams {
    fn default() -> Self {
        Self {
            camera: SensorModel::front_camera().with_mount(Pose::identity()),
            standoff: 2.0,
            band: (0.8, 1.2),
            max_incidence_deg: 70.0,
            n_per_voxel: 3,
            perturb_deg: 25.0,
            robot: RobotBox::planning(),
            max_height: None,
            skip_covered: true,
            seed: 0,
        }
    }
}

impl InspectionParams {
    fn distance_band(&self) -> (f64, f64) {
        (self.band.0 * self.standoff, self.band.1 * self.standoff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    pub pose: Pose,
    /// Surface the viewpoint was sampled for.
    pub target: usize,
    /// Covered surface ids, ascending.
    pub covered: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSet {
    pub candidates: Vec<Viewpoint>,
    /// Surfaces no candidate covers.
    pub uncoverable: Vec<usize>,
}

/// Pose at `position` whose x axis points at `target`.
pub fn facing(position: Vec3, target: &Vec3) -> Pose {
    let d = target - position;
    Pose::new(position, d.y.atan2(d.x)).with_pitch((-d.z).atan2(d.x.hypot(d.y)))
}

/// Whether surface `s` passes the distance, frustum, incidence and line of
/// sight tests from the camera at `pose`. Sight lines end on an exposed face
/// and may only cross free voxels.
pub fn is_visible(map: &OccupancyMap, s: &SurfaceVoxel, pose: &Pose, params: &InspectionParams) -> bool {
    let iso = pose.compose(&params.camera.mount_pose);
    let o = iso.translation.vector;
    let (lo, hi) = params.distance_band();
    let to_cam = o - s.center;
    let dist = to_cam.norm();
    if dist < lo || dist > hi {
        return false;
    }
    if !params.camera.in_fov(&(iso.rotation.inverse() * (-to_cam))) {
        return false;
    }
    let cos_limit = params.max_incidence_deg.to_radians().cos();
    let half = map.resolution() / 2.0;
    s.free_faces.iter().any(|&f| {
        let dir = SurfaceVoxel::face_direction(f);
        let normal = if s.multi_normal { dir } else { s.normal };
        if to_cam.dot(&normal) < cos_limit * dist {
            return false;
        }
        let p = s.center + dir * half;
        let ray = p - o;
        if ray.dot(&dir) >= 0.0 {
            return false;
        }
        let len = ray.norm();
        VoxelTraversal::new(map.grid(), &o, &(ray / len), len - 1e-7).all(|(v, _)| map.is_free(v))
    })
}

/// All surfaces visible from `pose`, ascending.
pub fn covered_surfaces(map: &OccupancyMap, surfaces: &SurfaceSet, pose: &Pose, params: &InspectionParams) -> Vec<usize> {
    let o = pose.compose(&params.camera.mount_pose).translation.vector;
    let reach = params.distance_band().1 + map.resolution();
    let Some((lo, hi)) = surfaces.grid().index_range(&Aabb::centered(o, Vec3::repeat(2.0 * reach))) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for_each_in_range(lo, hi, |v| {
        if let Some(id) = surfaces.id_of(v) {
            if is_visible(map, surfaces.get(id), pose, params) {
                out.push(id);
            }
        }
    });
    out.sort_unstable();
    out
}

fn tilt(normal: &Vec3, max_deg: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    let helper = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = normal.cross(&helper).normalize();
    let w = normal.cross(&u);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let theta = rng.random_range(0.0..max_deg.to_radians());
    (normal * theta.cos() + (u * phi.cos() + w * phi.sin()) * theta.sin()).normalize()
}

/// Candidate position at `standoff` from `c` along `dir`, lowered under the
/// height cap when needed while keeping the range.
fn place(c: &Vec3, dir: &Vec3, standoff: f64, max_height: Option<f64>) -> Option<Vec3> {
    let p = c + dir * standoff;
    match max_height {
        Some(h) if p.z > h => {
            let dz = h - c.z;
            let horiz = Vec3::new(dir.x, dir.y, 0.0);
            if dz.abs() >= standoff || horiz.norm() < 1e-6 {
                return None;
            }
            Some(c + horiz.normalize() * (standoff * standoff - dz * dz).sqrt() + Vec3::z() * dz)
        }
        _ => Some(p),
    }
}

/// Samples up to `n_per_voxel` viewpoints per surface at the standoff along
/// the (perturbed) normal, each facing its surface and collision-free.
pub fn sample_viewpoints(
    surfaces: &SurfaceSet,
    map: &OccupancyMap,
    params: &InspectionParams,
) -> Result<ViewpointSet, InspectError> {
    let (lo, hi) = params.distance_band();
    if !(params.standoff > 0.0) || hi > params.camera.max_range || lo <= 0.0 || lo > hi {
        return Err(InspectError::InvalidStandoff { standoff: params.standoff, range: params.camera.max_range });
    }
    let mut covered = vec![false; surfaces.len()];
    let mut candidates = Vec::new();
    for (id, s) in surfaces.voxels.iter().enumerate() {
        if params.skip_covered && covered[id] {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(id as u64);
        let mut dirs = vec![s.normal];
        if s.multi_normal {
            dirs.extend(s.free_faces.iter().map(|&f| SurfaceVoxel::face_direction(f)));
        }
        while dirs.len() < params.n_per_voxel.max(1) + if s.multi_normal { s.free_faces.len() } else { 0 } {
            dirs.push(tilt(&s.normal, params.perturb_deg, &mut rng));
        }
        for dir in dirs {
            let Some(p) = place(&s.center, &dir, params.standoff, params.max_height) else { continue };
            if params.max_height.is_some_and(|h| p.z > h + 1e-9) || !pose_is_free(map, &params.robot, &p) {
                continue;
            }
            let pose = facing(p, &s.center);
            if !is_visible(map, s, &pose, params) {
                continue;
            }
            let cov = covered_surfaces(map, surfaces, &pose, params);
            for &c in &cov {
                covered[c] = true;
            }
            candidates.push(Viewpoint { pose, target: id, covered: cov });
        }
    }
    let uncoverable = (0..surfaces.len()).filter(|&i| !covered[i]).collect();
    Ok(ViewpointSet { candidates, uncoverable })
}
