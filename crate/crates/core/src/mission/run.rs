use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collision::{segment_is_free, RobotBox};
use crate::explore::{
    exploration_gain, plan_homing, plan_repositioning, sample_local_graph, select_best_path, update_global_graph, ExploreError,
    GainParams, GlobalGraph, GlobalParams, LocalGraphParams, Repositioning,
};
use crate::geometry::{Aabb, Pose, Vec3};
use crate::graph::{Path, PlanGraph, Vertex};
use crate::inspect::{connect_and_tour, plan_inspection, InspectionParams, InspectionPlan, TourParams};
use crate::map::{write_map, Occupancy, OccupancyMap};
use crate::safety::{DriftModel, Navigator, RolloutParams, SafetyError};
use crate::timesync::{
    host_timestamp_imu, interval_stats, ptp_estimate_offset, ClockDomain, ClockKind, HostLink, PtpEstimate, PtpExchange, SyncRow,
};
use crate::world::{build_scenario, render_frame_noisy, SensorModel, VoxelWorld};

use super::metrics::{compute_metrics, write_trajectory_csv, MissionLog, TickRecord};
use super::persist::load_map;
use super::report::{MissionReport, PhaseReport};
use super::{MissionConfig, MissionError, Mode};

/// Arc-length slack when deciding how far along a path the tracker got.
const PREFIX_SLACK: f64 = 0.3;

/// Local path executed during exploration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreStep {
    pub predicted_gain: f64,
    pub known_before: usize,
    pub known_after: usize,
}

/// Outputs of one mission.
#[derive(Debug, Clone)]
pub struct MissionRun {
    pub report: MissionReport,
    pub log: MissionLog,
    pub inspection: Option<InspectionPlan>,
    pub explore_steps: Vec<ExploreStep>,
}

impl MissionRun {
    /// Writes `report.txt`, `metrics.csv`, `sync_stats.csv`,
    /// `trajectory.csv`, `inspection.csv` (when inspection ran), `map.bin`
    /// and `config.toml` into `dir`.
    pub fn write(&self, dir: &FsPath, config: &MissionConfig) -> Result<(), MissionError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.report.to_text())?;
        self.report.write_metrics_csv(std::fs::File::create(dir.join("metrics.csv"))?)?;
        crate::timesync::write_stats_csv(std::fs::File::create(dir.join("sync_stats.csv"))?, &self.report.sync)?;
        write_trajectory_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("trajectory.csv"))?), &self.log.ticks)?;
        if let Some(plan) = &self.inspection {
            plan.write_report(std::io::BufWriter::new(std::fs::File::create(dir.join("inspection.csv"))?))?;
        }
        std::fs::write(dir.join("map.bin"), write_map(&self.log.map))?;
        // The output location is not part of the mission, so reruns elsewhere stay byte-identical.
        let config = MissionConfig { output_dir: None, ..config.clone() };
        std::fs::write(dir.join("config.toml"), config.to_toml())?;
        Ok(())
    }
}

/// Device clocks and host stamps for the mapped LiDAR and the ToF camera.
struct Stamper {
    rng: ChaCha8Rng,
    host: ClockDomain,
    lidar: ClockDomain,
    ptp: PtpEstimate,
    next_sync: f64,
    interval: f64,
    tof_link: HostLink,
    lidar_stamps: Vec<f64>,
    tof_stamps: Vec<f64>,
}

const PTP_PATH_DELAY: f64 = 5e-5;

impl Stamper {
    fn new(config: &MissionConfig) -> Result<Self, MissionError> {
        let s = &config.sensors;
        let lidar = ClockDomain::new(s.lidar_clock_offset, s.lidar_drift_ppm, s.lidar_jitter, ClockKind::PtpSlave)
            .map_err(|e| MissionError::Config(e.to_string()))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seeds.clocks),
            host: ClockDomain::ideal(ClockKind::Host),
            lidar,
            ptp: PtpEstimate { offset: 0.0, path_delay: 0.0 },
            next_sync: 0.0,
            interval: s.ptp_interval,
            tof_link: HostLink { latency: s.tof_latency, jitter_sigma: s.tof_jitter },
            lidar_stamps: Vec::new(),
            tof_stamps: Vec::new(),
        })
    }

    /// Host time of a LiDAR frame captured at true time `t`, corrected with
    /// the latest PTP offset estimate.
    fn lidar(&mut self, t: f64) -> f64 {
        if t >= self.next_sync {
            let offset = self.lidar.nominal(t) - t;
            let x = PtpExchange::simulate(t, offset, PTP_PATH_DELAY, PTP_PATH_DELAY, 1e-4);
            self.ptp = ptp_estimate_offset(&x).expect("symmetric exchange is ordered");
            while self.next_sync <= t {
                self.next_sync += self.interval;
            }
        }
        let host = self.lidar.local(t, &mut self.rng) - self.ptp.offset;
        self.lidar_stamps.push(host);
        host
    }

    fn tof(&mut self, t: f64) {
        let host = host_timestamp_imu(t, &self.tof_link, &self.host, &mut self.rng);
        self.tof_stamps.push(host);
    }

    fn rows(&self) -> Vec<SyncRow> {
        [("lidar", &self.lidar_stamps), ("tof", &self.tof_stamps)]
            .into_iter()
            .filter_map(|(name, ts)| interval_stats(ts).ok().map(|stats| SyncRow { sensor: name.into(), stats }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Follow {
    Finished,
    Replan,
    Timeout,
}

struct Sim<'a> {
    config: &'a MissionConfig,
    world: &'a VoxelWorld,
    map: OccupancyMap,
    nav: Navigator,
    params: RolloutParams,
    lidar: SensorModel,
    scan_every: u64,
    next_scan: u64,
    tick: u64,
    stamper: Stamper,
    /// Estimated pose at every tick, index 0 being the start.
    estimates: Vec<Pose>,
    ticks: Vec<TickRecord>,
}

impl<'a> Sim<'a> {
    fn new(config: &'a MissionConfig, world: &'a VoxelWorld, map: OccupancyMap) -> Result<Self, MissionError> {
        let s = &config.sensors;
        let params = RolloutParams {
            max_time: f64::INFINITY,
            filter: config.safety_filter,
            drift: DriftModel { rate: s.drift_rate, seed: config.seeds.drift },
            ..Default::default()
        };
        let mut lidar = SensorModel::lidar().with_resolution(s.lidar_resolution_deg).with_range(s.lidar_range);
        lidar.range_noise_sigma = s.range_noise_sigma;
        let scan_every = ((1.0 / s.map_rate) / params.dt).round().max(1.0) as u64;
        let start = *world.start_pose();
        let mut sim = Self {
            config,
            world,
            map,
            nav: Navigator::new(start, params.drift),
            params,
            lidar,
            scan_every,
            next_scan: 0,
            tick: 0,
            stamper: Stamper::new(config)?,
            estimates: vec![start],
            ticks: Vec::new(),
        };
        // The body occupies its own footprint, so every voxel the planning
        // box touches is known free.
        let body = config.clearance_box().at(&start.position).expanded(&Vec3::repeat(world.resolution() / 2.0));
        if !world.box_collides(&body) {
            sim.map.clear_box(&body);
        }
        sim.scan()?;
        Ok(sim)
    }

    fn known(&self) -> usize {
        self.map.count(Occupancy::Free) + self.map.count(Occupancy::Occupied)
    }

    /// Renders and stamps a LiDAR frame, then integrates it at the
    /// estimated pose of the tick nearest the host stamp.
    fn scan(&mut self) -> Result<(), MissionError> {
        let seed = self.config.seeds.sensors ^ self.tick.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let frame = render_frame_noisy(self.world, &self.nav.pose, &self.lidar, seed)?;
        let host = self.stamper.lidar(self.nav.t);
        let k = ((host / self.params.dt).round().max(0.0) as usize).min(self.estimates.len() - 1);
        let pose = self.estimates[k];
        self.map.integrate_scan(&pose, &frame, &self.lidar)?;
        self.next_scan = self.tick + self.scan_every;
        Ok(())
    }

    fn record(&mut self, phase: Mode, o: &crate::safety::StepOutcome) {
        self.tick += 1;
        self.estimates.push(o.row.estimate);
        self.ticks.push(TickRecord {
            t: o.row.t,
            phase,
            truth: o.row.truth,
            estimate: o.row.estimate,
            target: o.track.target,
            velocity: self.nav.velocity,
            yaw_rate: o.row.command.yaw_rate,
            provenance: o.row.command.provenance,
        });
    }

    /// Holds position for `ticks` ticks while sensing, so a fresh map has
    /// enough observations around the start to plan in.
    fn hover(&mut self, phase: Mode, ticks: u64) -> Result<(), MissionError> {
        let here = Path::from_points(&[self.nav.estimate().position]);
        for _ in 0..ticks {
            if self.tick >= self.next_scan {
                self.scan()?;
            }
            self.stamper.tof(self.nav.t);
            self.nav.reset_path();
            let o = self.nav.step(self.world, &here, &self.params)?;
            self.record(phase, &o);
        }
        Ok(())
    }

    /// Prepends the current estimate when the path starts elsewhere.
    fn starting_here(&self, path: Path) -> Path {
        let here = self.nav.estimate();
        match path.first() {
            Some(v) if (v.position - here.position).norm() > 0.05 => {
                let mut w = vec![Vertex { position: here.position, yaw: here.yaw }];
                w.extend(path.waypoints);
                Path::new(w)
            }
            _ => path,
        }
    }

    /// Ticks along `path` until the tracker finishes, asks for a replan,
    /// stalls or the deadline passes. Returns the final path progress.
    fn follow(&mut self, path: &Path, phase: Mode, deadline: f64) -> Result<(Follow, f64), MissionError> {
        self.nav.reset_path();
        let mut progress = 0.0;
        let mut best = (0.0, self.nav.t);
        loop {
            if self.nav.t >= deadline - 1e-9 {
                return Ok((Follow::Timeout, progress));
            }
            if self.nav.t - best.1 > self.config.planner.stuck_time {
                return Ok((Follow::Replan, progress));
            }
            if self.tick >= self.next_scan {
                self.scan()?;
            }
            self.stamper.tof(self.nav.t);
            let o = match self.nav.step(self.world, path, &self.params) {
                Ok(o) => o,
                Err(SafetyError::ReplanRequest { .. }) => return Ok((Follow::Replan, progress)),
                Err(e) => return Err(e.into()),
            };
            self.record(phase, &o);
            progress = o.track.progress;
            if progress > best.0 + 0.05 {
                best = (progress, self.nav.t);
            }
            if o.finished {
                return Ok((Follow::Finished, progress));
            }
        }
    }

    fn local_bounds(&self, p: &Vec3) -> Aabb {
        let mut b = Aabb::centered(*p, Vec3::from(self.config.planner.local_extent)).intersection(&self.config.bounds.aabb());
        b.max.z = b.max.z.min(self.config.max_height);
        b
    }

    /// Local planning until the global graph runs out of frontier
    /// candidates. Returns whether exploration completed in time.
    fn explore(&mut self, deadline: f64, steps: &mut Vec<ExploreStep>) -> Result<(bool, GlobalGraph), MissionError> {
        let start = *self.world.start_pose();
        let robot = self.config.clearance_box();
        let planner = self.config.planner;
        let mut global = GlobalGraph::new(&start, GlobalParams { robot, ..Default::default() });
        let gain = GainParams::default();
        let mut stalls = 0;
        let mut failures: Vec<(usize, usize)> = Vec::new();
        let mut iteration = 0u64;
        loop {
            if self.nav.t >= deadline - 1e-9 {
                return Ok((false, global));
            }
            iteration += 1;
            let root = self.nav.estimate();
            let lparams =
                LocalGraphParams { robot, seed: self.config.seeds.planner.wrapping_add(iteration), ..Default::default() };
            let local = match sample_local_graph(&self.map, &root, &self.local_bounds(&root.position), &lparams) {
                Ok(g) => Some(g),
                Err(ExploreError::RootInCollision) => None,
                Err(e) => return Err(e.into()),
            };
            if let Some(local) = &local {
                let gains = vertex_gains(&self.map, local, &gain);
                let best = select_best_path(local, &gains, planner.lambda)?;
                match best {
                    Some(b) if b.vertices.len() > 1 && b.exploration_gain >= planner.local_min_gain && stalls < planner.stall_limit => {
                        let known_before = self.known();
                        let (_, progress) = self.follow(&local.path(&b.vertices), Mode::Explore, deadline)?;
                        let executed = executed_prefix(local, &b.vertices, progress);
                        update_global_graph(&mut global, local, &executed, &gains, &self.map);
                        let known_after = self.known();
                        steps.push(ExploreStep { predicted_gain: b.exploration_gain, known_before, known_after });
                        stalls = if known_after > known_before { 0 } else { stalls + 1 };
                        continue;
                    }
                    _ => update_global_graph(&mut global, local, &[local.root()], &gains, &self.map),
                }
            }
            stalls = 0;
            match plan_repositioning(&mut global, &self.map) {
                Repositioning::Exhausted => return Ok((true, global)),
                Repositioning::Path { path, target, .. } => {
                    let path = self.starting_here(path);
                    let (outcome, _) = self.follow(&path, Mode::Explore, deadline)?;
                    if outcome == Follow::Finished {
                        global.current = target;
                        continue;
                    }
                    let n = match failures.iter_mut().find(|f| f.0 == target) {
                        Some(f) => {
                            f.1 += 1;
                            f.1
                        }
                        None => {
                            failures.push((target, 1));
                            1
                        }
                    };
                    if n >= planner.reposition_retries {
                        global.candidates.retain(|c| c.vertex != target);
                    }
                }
            }
        }
    }

    fn inspection_params(&self) -> (InspectionParams, TourParams) {
        let c = self.config;
        let ip = InspectionParams {
            standoff: c.standoff,
            max_height: Some(c.max_height),
            robot: c.clearance_box(),
            seed: c.seeds.planner,
            ..Default::default()
        };
        let tp =
            TourParams { max_height: Some(c.max_height), robot: c.clearance_box(), seed: c.seeds.planner, ..Default::default() };
        (ip, tp)
    }

    /// Plans a viewpoint tour over the current map and flies it. Only
    /// viewpoints the body actually passed are kept in the returned tour.
    fn inspect(&mut self, deadline: f64) -> Result<InspectionPlan, MissionError> {
        let (ip, tp) = self.inspection_params();
        let mut plan = plan_inspection(&self.map, &self.nav.estimate(), &ip, &tp)?;
        let first = self.ticks.len();
        let mut path = plan.tour.path.clone();
        for _ in 0..self.config.planner.retries {
            let (outcome, _) = self.follow(&path, Mode::Inspect, deadline)?;
            if outcome == Follow::Timeout {
                break;
            }
            let reached = self.reached(&plan, first);
            let pending: Vec<Pose> = plan.tour.order.iter().filter(|&&i| !reached[i]).map(|&i| plan.viewpoints[i].pose).collect();
            if pending.is_empty() {
                break;
            }
            path = connect_and_tour(&pending, &self.nav.estimate(), &self.map, &tp).path;
        }
        let reached = self.reached(&plan, first);
        plan.tour.order.retain(|&i| reached[i]);
        Ok(plan)
    }

    fn reached(&self, plan: &InspectionPlan, first_tick: usize) -> Vec<bool> {
        plan.viewpoints
            .iter()
            .map(|vp| {
                self.ticks[first_tick..]
                    .iter()
                    .any(|t| (t.truth.position - vp.pose.position).norm() <= self.config.planner.viewpoint_tolerance)
            })
            .collect()
    }

    /// Path to the start: through the global graph when the robot can see
    /// one of its vertices, otherwise over a roadmap on the current map.
    fn home_path(&self, global: Option<&GlobalGraph>) -> Result<Path, MissionError> {
        let here = self.nav.estimate();
        let attach = RobotBox::physical();
        if let Some(g) = global {
            let mut near: Vec<(usize, f64)> =
                (0..g.graph.len()).map(|i| (i, (g.graph.position(i) - here.position).norm())).collect();
            near.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            for (v, _) in near.into_iter().take(16) {
                if segment_is_free(&self.map, &attach, &here.position, &g.graph.position(v)) {
                    let (_, path) = plan_homing(g, v)?;
                    return Ok(self.starting_here(path));
                }
            }
        }
        let (_, tp) = self.inspection_params();
        let tour = connect_and_tour(&[*self.world.start_pose()], &here, &self.map, &tp);
        if !tour.unreachable.is_empty() {
            return Err(MissionError::Planner("no path back to the start".into()));
        }
        Ok(tour.path)
    }

    fn home(&mut self, global: Option<&GlobalGraph>, deadline: f64) -> Result<bool, MissionError> {
        for _ in 0..self.config.planner.retries {
            let path = self.home_path(global)?;
            match self.follow(&path, Mode::Home, deadline)?.0 {
                Follow::Finished => return Ok(true),
                Follow::Timeout => return Ok(false),
                Follow::Replan => {}
            }
        }
        Ok(false)
    }
}

fn vertex_gains(map: &OccupancyMap, g: &PlanGraph, params: &GainParams) -> Vec<f64> {
    (0..g.len()).map(|v| exploration_gain(map, &Pose::new(g.position(v), g.vertex(v).yaw), params)).collect()
}

/// Vertices of `chain` up to the arc length the tracker reached.
fn executed_prefix(g: &PlanGraph, chain: &[usize], progress: f64) -> Vec<usize> {
    let mut arc = 0.0;
    let mut out = vec![chain[0]];
    for w in chain.windows(2) {
        arc += (g.position(w[1]) - g.position(w[0])).norm();
        if arc > progress + PREFIX_SLACK {
            break;
        }
        out.push(w[1]);
    }
    out
}

/// Runs the configured mode sequence tick by tick. Each tick renders and
/// stamps sensors, integrates LiDAR into the map, and steps the navigator
/// through the safety policy toward the active planner's path.
pub fn run_mission(config: &MissionConfig) -> Result<MissionRun, MissionError> {
    config.validate()?;
    let world = build_scenario(&config.scenario)?;
    config.validate_for(&world)?;
    let map = match &config.prior_map {
        Some(path) => {
            let m = load_map(path)?;
            if m.grid() != world.grid() {
                return Err(MissionError::Config("prior map lattice does not match the scenario".into()));
            }
            m
        }
        None => OccupancyMap::for_world(&world, config.map)?,
    };
    let mut sim = Sim::new(config, &world, map)?;
    sim.hover(config.modes[0], config.planner.warmup_scans * sim.scan_every)?;
    let mut phases = Vec::new();
    let mut global: Option<GlobalGraph> = None;
    let mut inspection = None;
    let mut explore_complete = None;
    let mut explore_steps = Vec::new();
    for &mode in &config.modes {
        let t0 = sim.nav.t;
        let ticks0 = sim.ticks.len();
        let travelled0 = sim.nav.travelled;
        let outcome = match mode {
            Mode::Explore => {
                let (done, g) = sim.explore(t0 + config.limits.explore, &mut explore_steps)?;
                global = Some(g);
                explore_complete = Some(done);
                if done { "complete" } else { "timeout" }
            }
            // Inspection waits for exploration to report completion.
            Mode::Inspect if explore_complete == Some(false) => "skipped",
            Mode::Inspect => {
                let plan = sim.inspect(t0 + config.limits.inspect)?;
                let done = plan.tour.order.len() == plan.viewpoints.len();
                inspection = Some(plan);
                if done { "complete" } else { "incomplete" }
            }
            Mode::Home => {
                if sim.home(global.as_ref(), t0 + config.limits.home)? {
                    "complete"
                } else {
                    "incomplete"
                }
            }
        };
        phases.push(PhaseReport {
            mode,
            duration: sim.nav.t - t0,
            path_length: sim.nav.travelled - travelled0,
            ticks: sim.ticks.len() - ticks0,
            outcome: outcome.to_string(),
        });
    }
    let coverage = inspection.as_ref().map(|p: &InspectionPlan| {
        let covered = p.covered_by().iter().filter(|c| c.is_some()).count();
        (covered, p.surfaces.len())
    });
    let sync = sim.stamper.rows();
    let log = MissionLog { start: *world.start_pose(), ticks: sim.ticks, map: sim.map, coverage };
    let metrics = compute_metrics(&log, &world);
    let report = MissionReport::new(config, &metrics, coverage, explore_complete, phases, sync);
    let run = MissionRun { report, log, inspection, explore_steps };
    if let Some(dir) = &config.output_dir {
        run.write(dir, config)?;
    }
    Ok(run)
}
