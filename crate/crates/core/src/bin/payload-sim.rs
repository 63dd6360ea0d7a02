#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use payload_sim::map::Occupancy;
use payload_sim::mission::{
    compute_metrics, load_map, read_trajectory_csv, run_mission, MissionConfig, MissionError, MissionLog, Mode,
};
use payload_sim::timesync::{calibrated_bench, run_bench, write_stats_csv};
use payload_sim::world::build_scenario;

#[derive(Parser)]
#[command(name = "payload-sim", version, about = "Deterministic payload mission simulator")]
struct Cli {
    /// Root directory for mission outputs.
    #[arg(long, env = "PAYLOAD_SIM_OUT", default_value = "out", global = true)]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mission from a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's, under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated mode sequence, e.g. `explore,home`.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        #[arg(long)]
        max_height: Option<f64>,
        #[arg(long)]
        standoff: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        drift_rate: Option<f64>,
        /// Track paths without the safety policy.
        #[arg(long)]
        no_safety: bool,
    },
    /// Recompute metrics from a mission output directory.
    Replay { dir: PathBuf },
    /// Simulate the synchronization bench and print interval statistics.
    Stats {
        #[arg(long, default_value_t = 520.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the lattice and class counts of a saved map.
    MapInfo { map: PathBuf },
}

fn output_dir(root: &Path, out: Option<PathBuf>, config: &MissionConfig) -> PathBuf {
    let dir = out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from(&config.name));
    if dir.is_absolute() {
        dir
    } else {
        root.join(dir)
    }
}

fn run(cli: Cli) -> Result<(), MissionError> {
    match cli.command {
        Command::Run { config, out, modes, max_height, standoff, seed, drift_rate, no_safety } => {
            let mut c = MissionConfig::load(&config)?;
            if let Some(m) = modes {
                c.modes = m;
            }
            if let Some(h) = max_height {
                c.max_height = h;
            }
            if let Some(s) = standoff {
                c.standoff = s;
            }
            if let Some(s) = seed {
                c.seeds.planner = s;
            }
            if let Some(r) = drift_rate {
                c.sensors.drift_rate = r;
            }
            if no_safety {
                c.safety_filter = false;
            }
            if let Some(p) = &c.prior_map {
                if p.is_relative() {
                    c.prior_map = Some(config.parent().unwrap_or(Path::new(".")).join(p));
                }
            }
            let dir = output_dir(&cli.out_root, out, &c);
            c.output_dir = Some(dir.clone());
            let mission = run_mission(&c)?;
            print!("{}", mission.report.to_text());
            eprintln!("wrote {}", dir.display());
        }
        Command::Replay { dir } => {
            let config = MissionConfig::load(&dir.join("config.toml"))?;
            let world = build_scenario(&config.scenario)?;
            let file = std::fs::File::open(dir.join("trajectory.csv"))?;
            let ticks = read_trajectory_csv(std::io::BufReader::new(file))?;
            let map = load_map(&dir.join("map.bin"))?;
            let coverage = match std::fs::read_to_string(dir.join("inspection.csv")) {
                Ok(text) => {
                    let rows: Vec<&str> = text.lines().skip(1).collect();
                    Some((rows.iter().filter(|r| !r.ends_with("UNCOVERED")).count(), rows.len()))
                }
                Err(_) => None,
            };
            let log = MissionLog { start: *world.start_pose(), ticks, map, coverage };
            let m = compute_metrics(&log, &world);
            println!("ticks             {}", log.ticks.len());
            println!("explored          {:.4} ({}/{})", m.explored_fraction, m.explored_free, m.reachable_free);
            match m.coverage_fraction {
                Some(c) => println!("coverage          {c:.4}"),
                None => println!("coverage          -"),
            }
            println!("path length       {:.3} m", m.path_length);
            println!("simulated time    {:.2} s", m.duration);
            println!("collisions        {}", m.collisions);
            println!("max commanded z   {:.3} m", m.max_commanded_z);
            println!("final offset      {:.3} m", m.final_offset);
            println!("false free        {}", m.false_free);
        }
        Command::Stats { duration, seed, csv } => {
            if !(duration > 0.0) {
                return Err(MissionError::Config(format!("duration must be positive, got {duration}")));
            }
            let report = run_bench(&calibrated_bench(duration, seed)).map_err(|e| MissionError::Planner(e.to_string()))?;
            println!("sensor          mean_ms   std_ms  samples");
            for r in &report.rows {
                println!("{:<15} {:>8.3} {:>8.3}  {}", r.sensor, r.stats.mean_ms, r.stats.std_ms, r.stats.n_samples);
            }
            println!("frames {} unassigned {} misassigned {}", report.frames, report.unassigned, report.misassigned);
            if let Some(path) = csv {
                write_stats_csv(std::fs::File::create(path)?, &report.rows)?;
            }
        }
        Command::MapInfo { map } => {
            let m = load_map(&map)?;
            let g = m.grid();
            println!("extents     {} x {} x {}", g.extents[0], g.extents[1], g.extents[2]);
            println!("resolution  {} m", g.resolution);
            println!("origin      {} {} {}", g.origin.x, g.origin.y, g.origin.z);
            for class in [Occupancy::Unknown, Occupancy::Free, Occupancy::Occupied] {
                println!("{:<11} {}", format!("{class:?}").to_lowercase(), m.count(class));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
