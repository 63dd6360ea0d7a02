use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RayHit, VoxelWorld, WorldError};
use crate::geometry::{Pose, Vec3};

/// Range value stored for rays that hit nothing within `max_range`.
pub const NO_RETURN: f64 = f64::INFINITY;
/// Range reported on every pixel of a sensor whose origin is embedded in an obstacle.
pub const MIN_RANGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Lidar,
    Tof,
    MonoCam,
    ColorCam,
    Radar,
    Imu,
}

impl SensorKind {
    pub fn is_exteroceptive(&self) -> bool {
        !matches!(self, SensorKind::Imu)
    }
}

/// Field of view, range, rate and body-frame mounting of one sensor.
///
/// Sensor frame convention: x forward, y left, z up. Azimuth is measured
/// about +z from +x, elevation upward from the xy-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub name: String,
    pub kind: SensorKind,
    pub azimuth_fov_deg: f64,
    pub elevation_fov_deg: f64,
    pub max_range: f64,
    pub nominal_rate: f64,
    pub mount_pose: Pose,
    pub angular_resolution_deg: f64,
    /// Standard deviation of additive range noise; zero keeps frames exact.
    #[serde(default)]
    pub range_noise_sigma: f64,
}

impl SensorModel {
    /// Dome LiDAR on the back of the payload: 360 x 90 deg, 30 m, 10 Hz.
    pub fn lidar() -> Self {
        Self {
            name: "lidar".into(),
            kind: SensorKind::Lidar,
            azimuth_fov_deg: 360.0,
            elevation_fov_deg: 90.0,
            max_range: 30.0,
            nominal_rate: 10.0,
            mount_pose: Pose::from_xyz_yaw(-0.06, 0.0, 0.08, 0.0),
            angular_resolution_deg: 2.0,
            range_noise_sigma: 0.0,
        }
    }

    /// Front time-of-flight camera: 56 x 44 deg, 4 m.
    pub fn tof() -> Self {
        Self {
            name: "tof".into(),
            kind: SensorKind::Tof,
            azimuth_fov_deg: 56.0,
            elevation_fov_deg: 44.0,
            max_range: 4.0,
            nominal_rate: 10.0,
            mount_pose: Pose::from_xyz_yaw(0.08, 0.0, 0.0, 0.0),
            angular_resolution_deg: 2.0,
            range_noise_sigma: 0.0,
        }
    }

    /// Front color camera, modeled as a depth-bearing 118 x 94 deg frustum.
    pub fn front_camera() -> Self {
        Self {
            name: "front".into(),
            kind: SensorKind::ColorCam,
            azimuth_fov_deg: 118.0,
            elevation_fov_deg: 94.0,
            max_range: 30.0,
            nominal_rate: 20.0,
            mount_pose: Pose::from_xyz_yaw(0.08, 0.0, 0.03, 0.0),
            angular_resolution_deg: 4.0,
            range_noise_sigma: 0.0,
        }
    }

    fn side_camera(name: &str, yaw: f64, y: f64) -> Self {
        Self {
            name: name.into(),
            kind: SensorKind::MonoCam,
            azimuth_fov_deg: 185.0,
            elevation_fov_deg: 185.0,
            max_range: 30.0,
            nominal_rate: 20.0,
            mount_pose: Pose::from_xyz_yaw(0.0, y, 0.02, yaw),
            angular_resolution_deg: 5.0,
            range_noise_sigma: 0.0,
        }
    }

    /// Left fisheye camera (185 deg), facing +y.
    pub fn left_camera() -> Self {
        Self::side_camera("left", std::f64::consts::FRAC_PI_2, 0.07)
    }

    /// Right fisheye camera (185 deg), facing -y.
    pub fn right_camera() -> Self {
        Self::side_camera("right", -std::f64::consts::FRAC_PI_2, -0.07)
    }

    /// FMCW radar: 180 x 180 deg, 49 m, pitched 30 deg below the horizon.
    pub fn radar() -> Self {
        Self {
            name: "radar".into(),
            kind: SensorKind::Radar,
            azimuth_fov_deg: 180.0,
            elevation_fov_deg: 180.0,
            max_range: 49.0,
            nominal_rate: 10.0,
            mount_pose: Pose::from_xyz_yaw(0.07, 0.0, -0.03, 0.0)
                .with_pitch(30f64.to_radians()),
            angular_resolution_deg: 6.0,
            range_noise_sigma: 0.0,
        }
    }

    pub fn imu() -> Self {
        Self {
            name: "imu".into(),
            kind: SensorKind::Imu,
            azimuth_fov_deg: 0.0,
            elevation_fov_deg: 0.0,
            max_range: 0.0,
            nominal_rate: 200.0,
            mount_pose: Pose::identity(),
            angular_resolution_deg: 0.0,
            range_noise_sigma: 0.0,
        }
    }

    /// The full payload suite.
    pub fn payload_suite() -> Vec<SensorModel> {
        vec![
            Self::lidar(),
            Self::tof(),
            Self::front_camera(),
            Self::left_camera(),
            Self::right_camera(),
            Self::radar(),
            Self::imu(),
        ]
    }

    pub fn with_range(mut self, max_range: f64) -> Self {
        self.max_range = max_range;
        self
    }

    pub fn with_resolution(mut self, deg: f64) -> Self {
        self.angular_resolution_deg = deg;
        self
    }

    pub fn with_mount(mut self, mount: Pose) -> Self {
        self.mount_pose = mount;
        self
    }

    /// Azimuth samples in degrees, ordered from +az (image left) to -az.
    pub fn azimuth_samples(&self) -> Vec<f64> {
        let mut v = axis_samples(self.azimuth_fov_deg, self.angular_resolution_deg, true);
        v.reverse();
        v
    }

    /// Elevation samples in degrees, ordered from the top row down.
    pub fn elevation_samples(&self) -> Vec<f64> {
        let mut v: Vec<f64> = axis_samples(self.elevation_fov_deg, self.angular_resolution_deg, false)
            .into_iter()
            .map(|e| e.clamp(-90.0, 90.0))
            .collect();
        v.reverse();
        v
    }

    /// Unit ray directions in the sensor frame, row-major (rows = elevation).
    pub fn ray_directions(&self) -> (usize, usize, Vec<Vec3>) {
        let az = self.azimuth_samples();
        let el = self.elevation_samples();
        let mut dirs = Vec::with_capacity(az.len() * el.len());
        for e in &el {
            let (se, ce) = e.to_radians().sin_cos();
            for a in &az {
                let (sa, ca) = a.to_radians().sin_cos();
                dirs.push(Vec3::new(ce * ca, ce * sa, se));
            }
        }
        (el.len(), az.len(), dirs)
    }

    /// Whether a sensor-frame direction lies inside the field of view.
    pub fn in_fov(&self, p: &Vec3) -> bool {
        let (az, el) = azimuth_elevation(p);
        let tol = 1e-9;
        (self.azimuth_fov_deg >= 360.0 || az.abs() <= self.azimuth_fov_deg / 2.0 + tol)
            && el.abs() <= (self.elevation_fov_deg / 2.0).min(90.0) + tol
    }
}

/// Azimuth and elevation of a sensor-frame vector, in degrees.
pub fn azimuth_elevation(p: &Vec3) -> (f64, f64) {
    let az = p.y.atan2(p.x).to_degrees();
    let el = p.z.atan2(p.x.hypot(p.y)).to_degrees();
    (az, el)
}

fn axis_samples(fov: f64, res: f64, wrap: bool) -> Vec<f64> {
    if !(res > 0.0) || !(fov > 0.0) {
        return vec![0.0];
    }
    if wrap && fov >= 360.0 {
        let n = ((360.0 / res).round() as usize).max(1);
        let step = 360.0 / n as f64;
        let half = (n / 2) as f64;
        return (0..n).map(|i| (i as f64 - half) * step).collect();
    }
    let mut n = ((fov / res).round() as usize).max(1);
    if n.is_multiple_of(2) {
        n += 1;
    }
    if n == 1 {
        return vec![0.0];
    }
    let step = fov / (n - 1) as f64;
    let mid = ((n - 1) / 2) as f64;
    (0..n).map(|i| (i as f64 - mid) * step).collect()
}

/// World-frame ray origin and directions for a sensor at `body_pose`.
/// Rendering and map integration both go through here, so a frame can be
/// replayed into a map along bit-identical rays.
pub fn sensor_rays(body_pose: &Pose, model: &SensorModel) -> (Vec3, usize, usize, Vec<Vec3>) {
    let iso = body_pose.compose(&model.mount_pose);
    let origin = iso.transform_point(&Point3::origin()).coords;
    let (rows, cols, dirs) = model.ray_directions();
    let world_dirs = dirs.iter().map(|d| iso.rotation * d).collect();
    (origin, rows, cols, world_dirs)
}

/// Row-major range image; each pixel is a range in `(0, max_range]` or [`NO_RETURN`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeImage {
    pub rows: usize,
    pub cols: usize,
    pub ranges: Vec<f64>,
}

impl RangeImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.ranges[row * self.cols + col]
    }

    pub fn center(&self) -> f64 {
        self.get(self.rows / 2, self.cols / 2)
    }

    pub fn min_range(&self) -> f64 {
        self.ranges.iter().copied().fold(NO_RETURN, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialSample {
    pub acceleration: Vec3,
    pub angular_rate: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Depth(RangeImage),
    PointCloud(Vec<Vec3>),
    Inertial(InertialSample),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub sensor_id: String,
    /// Seconds in the device clock; filled in by the time synchronization layer.
    pub local_timestamp: f64,
    pub payload: Payload,
    /// The sensor origin was inside an obstacle; every range is [`MIN_RANGE`].
    pub embedded: bool,
}

impl SensorFrame {
    pub fn inertial(sensor_id: &str, local_timestamp: f64, sample: InertialSample) -> Self {
        Self {
            sensor_id: sensor_id.into(),
            local_timestamp,
            payload: Payload::Inertial(sample),
            embedded: false,
        }
    }

    pub fn depth(&self) -> Option<&RangeImage> {
        match &self.payload {
            Payload::Depth(img) => Some(img),
            _ => None,
        }
    }

    /// Returned points in the sensor frame. Depth payloads are expanded using
    /// the model's ray grid.
    pub fn points(&self, model: &SensorModel) -> Vec<Vec3> {
        match &self.payload {
            Payload::PointCloud(p) => p.clone(),
            Payload::Depth(img) => {
                let (_, _, dirs) = model.ray_directions();
                img.ranges
                    .iter()
                    .zip(dirs)
                    .filter(|(r, _)| r.is_finite())
                    .map(|(r, d)| d * *r)
                    .collect()
            }
            Payload::Inertial(_) => Vec::new(),
        }
    }
}

/// Renders one noise-free frame: one ray per angular sample of the model.
pub fn render_frame(
    world: &VoxelWorld,
    body_pose: &Pose,
    model: &SensorModel,
) -> Result<SensorFrame, WorldError> {
    render_frame_noisy(world, body_pose, model, 0)
}

/// Renders a frame, adding the model's range noise drawn from `seed`.
pub fn render_frame_noisy(
    world: &VoxelWorld,
    body_pose: &Pose,
    model: &SensorModel,
    seed: u64,
) -> Result<SensorFrame, WorldError> {
    if !model.kind.is_exteroceptive() {
        return Err(WorldError::NotExteroceptive(model.name.clone()));
    }
    let (origin, rows, cols, dirs) = sensor_rays(body_pose, model);
    let embedded = world.is_occupied_at(&origin);
    let mut ranges: Vec<f64> = if embedded {
        vec![MIN_RANGE; dirs.len()]
    } else {
        dirs.par_iter()
            .map(|d| match world.cast_unchecked(&origin, d, model.max_range) {
                RayHit::Hit { distance, .. } => distance.max(MIN_RANGE),
                RayHit::NoReturn => NO_RETURN,
                RayHit::Embedded => MIN_RANGE,
            })
            .collect()
    };
    if model.range_noise_sigma > 0.0 && !embedded {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, model.range_noise_sigma).expect("finite sigma");
        for r in ranges.iter_mut().filter(|r| r.is_finite()) {
            *r = (*r + noise.sample(&mut rng)).clamp(MIN_RANGE, model.max_range);
        }
    }
    let payload = if model.kind == SensorKind::Radar {
        let (_, _, local) = model.ray_directions();
        Payload::PointCloud(
            ranges
                .iter()
                .zip(local)
                .filter(|(r, _)| r.is_finite())
                .map(|(r, d)| d * *r)
                .collect(),
        )
    } else {
        Payload::Depth(RangeImage { rows, cols, ranges })
    };
    Ok(SensorFrame { sensor_id: model.name.clone(), local_timestamp: 0.0, payload, embedded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    fn room_with_wall(wall_x: f64) -> VoxelWorld {
        let mut w =
            VoxelWorld::new(0.2, [60, 40, 15], Pose::from_xyz_yaw(1.01, 4.03, 1.51, 0.0)).unwrap();
        w.fill_box(&Aabb::new(Vec3::new(wall_x, 0.0, 0.0), Vec3::new(wall_x + 0.2, 8.0, 3.0)), true);
        w
    }

    #[test]
    fn table_defaults() {
        let l = SensorModel::lidar();
        assert_eq!((l.azimuth_fov_deg, l.elevation_fov_deg, l.max_range, l.nominal_rate), (360.0, 90.0, 30.0, 10.0));
        let t = SensorModel::tof();
        assert_eq!((t.azimuth_fov_deg, t.elevation_fov_deg, t.max_range), (56.0, 44.0, 4.0));
        let r = SensorModel::radar();
        assert_eq!((r.azimuth_fov_deg, r.elevation_fov_deg, r.max_range), (180.0, 180.0, 49.0));
        assert!((r.mount_pose.pitch - 30f64.to_radians()).abs() < 1e-12);
        assert_eq!(SensorModel::left_camera().azimuth_fov_deg, 185.0);
        let f = SensorModel::front_camera();
        assert_eq!((f.azimuth_fov_deg, f.elevation_fov_deg), (118.0, 94.0));
    }

    #[test]
    fn radar_boresight_points_down() {
        let r = SensorModel::radar();
        let boresight = r.mount_pose.rotation() * Vec3::x();
        let el = boresight.z.atan2(boresight.x.hypot(boresight.y)).to_degrees();
        assert!((el + 30.0).abs() < 1e-9, "elevation {el}");
    }

    #[test]
    fn samples_are_centered_and_within_fov() {
        let t = SensorModel::tof();
        let az = t.azimuth_samples();
        assert_eq!(az.len() % 2, 1);
        assert_eq!(az[az.len() / 2], 0.0);
        assert!(az.iter().all(|a| a.abs() <= 28.0 + 1e-12));
        let l = SensorModel::lidar();
        let az = l.azimuth_samples();
        assert_eq!(az.len(), 180);
        assert!(az.contains(&0.0));
    }

    #[test]
    fn tof_wall_two_meters() {
        // ToF optical center at body x + 0.08; wall face at 1.01 + 0.08 + 2.0 ~ 3.09 -> use a lattice face.
        let world = room_with_wall(3.2);
        let model = SensorModel::tof();
        let body = Pose::from_xyz_yaw(1.12, 4.03, 1.51, 0.0);
        let frame = render_frame(&world, &body, &model).unwrap();
        let c = frame.depth().unwrap().center();
        assert!((c - 2.0).abs() <= 0.1, "center {c}");
    }

    #[test]
    fn tof_wall_beyond_range_is_no_return() {
        let world = room_with_wall(7.2);
        let model = SensorModel::tof();
        let body = Pose::from_xyz_yaw(1.12, 4.03, 1.51, 0.0);
        let img = render_frame(&world, &body, &model).unwrap();
        let img = img.depth().unwrap();
        let center_row = img.rows / 2;
        for c in 0..img.cols {
            assert_eq!(img.get(center_row, c), NO_RETURN);
        }
    }

    #[test]
    fn embedded_sensor_flagged() {
        let world = room_with_wall(3.2);
        let body = Pose::from_xyz_yaw(3.2, 4.03, 1.51, 0.0);
        let frame = render_frame(&world, &body, &SensorModel::tof()).unwrap();
        assert!(frame.embedded);
        assert!(frame.depth().unwrap().ranges.iter().all(|r| *r == MIN_RANGE));
    }

    #[test]
    fn imu_is_not_rendered() {
        let world = room_with_wall(3.2);
        assert!(render_frame(&world, world.start_pose(), &SensorModel::imu()).is_err());
    }

    #[test]
    fn radar_points_inside_frustum() {
        let world = room_with_wall(5.0);
        let model = SensorModel::radar();
        let frame = render_frame(&world, world.start_pose(), &model).unwrap();
        let pts = frame.points(&model);
        assert!(!pts.is_empty());
        for p in pts {
            assert!(model.in_fov(&p) && p.norm() <= model.max_range + 1e-9);
        }
    }
}
