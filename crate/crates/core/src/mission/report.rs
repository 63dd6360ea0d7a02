use std::fmt::Write as _;
use std::io::Write;

use crate::timesync::SyncRow;

use super::metrics::Metrics;
use super::{MissionConfig, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub mode: Mode,
    /// Simulated seconds.
    pub duration: f64,
    pub path_length: f64,
    pub ticks: usize,
    pub outcome: String,
}

/// Mission summary. Times are simulated seconds, so the report is a pure
/// function of the config.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionReport {
    pub name: String,
    pub scenario: String,
    pub modes: Vec<Mode>,
    pub explored_fraction: f64,
    pub explored_free: usize,
    pub reachable_free: usize,
    pub coverage_fraction: Option<f64>,
    pub covered_surfaces: usize,
    pub surfaces: usize,
    pub path_length: f64,
    pub wall_time: f64,
    pub collisions: usize,
    pub max_commanded_z: f64,
    pub final_offset: f64,
    pub false_free: usize,
    pub explore_complete: Option<bool>,
    pub phases: Vec<PhaseReport>,
    pub sync: Vec<SyncRow>,
}

impl MissionReport {
    pub fn new(
        config: &MissionConfig,
        m: &Metrics,
        coverage: Option<(usize, usize)>,
        explore_complete: Option<bool>,
        phases: Vec<PhaseReport>,
        sync: Vec<SyncRow>,
    ) -> Self {
        let s = &config.scenario;
        let (covered_surfaces, surfaces) = coverage.unwrap_or((0, 0));
        Self {
            name: config.name.clone(),
            scenario: format!(
                "{} seed={} dims={}x{}x{} res={}",
                s.generator, s.seed, s.dims[0], s.dims[1], s.dims[2], s.resolution
            ),
            modes: config.modes.clone(),
            explored_fraction: m.explored_fraction,
            explored_free: m.explored_free,
            reachable_free: m.reachable_free,
            coverage_fraction: m.coverage_fraction,
            covered_surfaces,
            surfaces,
            path_length: m.path_length,
            wall_time: m.duration,
            collisions: m.collisions,
            max_commanded_z: m.max_commanded_z,
            final_offset: m.final_offset,
            false_free: m.false_free,
            explore_complete,
            phases,
            sync,
        }
    }

    fn modes_text(&self) -> String {
        self.modes.iter().map(Mode::name).collect::<Vec<_>>().join(" ")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        writeln!(s, "mission          {}", self.name).unwrap();
        writeln!(s, "scenario         {}", self.scenario).unwrap();
        writeln!(s, "modes            {}", self.modes_text()).unwrap();
        writeln!(
            s,
            "explored         {:.4} ({}/{} reachable free voxels)",
            self.explored_fraction, self.explored_free, self.reachable_free
        )
        .unwrap();
        match self.coverage_fraction {
            Some(c) => writeln!(s, "coverage         {c:.4} ({}/{} surfaces)", self.covered_surfaces, self.surfaces).unwrap(),
            None => writeln!(s, "coverage         -").unwrap(),
        }
        writeln!(s, "path length      {:.3} m", self.path_length).unwrap();
        writeln!(s, "simulated time   {:.2} s", self.wall_time).unwrap();
        writeln!(s, "collisions       {}", self.collisions).unwrap();
        writeln!(s, "max commanded z  {:.3} m", self.max_commanded_z).unwrap();
        writeln!(s, "final offset     {:.3} m", self.final_offset).unwrap();
        writeln!(s, "false free       {}", self.false_free).unwrap();
        if let Some(done) = self.explore_complete {
            writeln!(s, "explore complete {}", yes_no(done)).unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "phase     duration_s  path_m    ticks  outcome").unwrap();
        for p in &self.phases {
            writeln!(s, "{:<9} {:>10.2}  {:>8.3}  {:>5}  {}", p.mode.name(), p.duration, p.path_length, p.ticks, p.outcome)
                .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "sensor    mean_ms   std_ms  samples").unwrap();
        for r in &self.sync {
            writeln!(s, "{:<9} {:>8.3} {:>8.3}  {}", r.sensor, r.stats.mean_ms, r.stats.std_ms, r.stats.n_samples).unwrap();
        }
        s
    }

    /// `key,value` rows, one per scalar field and per phase.
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        let rows: Vec<(String, String)> = vec![
            ("mission".into(), self.name.clone()),
            ("scenario".into(), self.scenario.clone()),
            ("modes".into(), self.modes_text()),
            ("explored_fraction".into(), format!("{:.6}", self.explored_fraction)),
            ("explored_free".into(), self.explored_free.to_string()),
            ("reachable_free".into(), self.reachable_free.to_string()),
            ("coverage_fraction".into(), opt(self.coverage_fraction)),
            ("covered_surfaces".into(), self.covered_surfaces.to_string()),
            ("surfaces".into(), self.surfaces.to_string()),
            ("path_length_m".into(), format!("{:.6}", self.path_length)),
            ("wall_time_s".into(), format!("{:.3}", self.wall_time)),
            ("collisions".into(), self.collisions.to_string()),
            ("max_commanded_z_m".into(), format!("{:.6}", self.max_commanded_z)),
            ("final_offset_m".into(), format!("{:.6}", self.final_offset)),
            ("false_free".into(), self.false_free.to_string()),
            ("explore_complete".into(), self.explore_complete.map_or(String::new(), |b| b.to_string())),
        ];
        for (k, v) in rows {
            w.write_record([k, v])?;
        }
        for p in &self.phases {
            let m = p.mode.name();
            w.write_record([format!("{m}_duration_s"), format!("{:.3}", p.duration)])?;
            w.write_record([format!("{m}_path_m"), format!("{:.6}", p.path_length)])?;
            w.write_record([format!("{m}_outcome"), p.outcome.clone()])?;
        }
        w.flush()
    }
}
