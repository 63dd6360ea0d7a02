//! Runs a bundled mission in memory and prints its report. Pass a generator
//! name to pick the scenario and a directory to write the output set.

use payload_sim::mission::{run_mission, MissionConfig};
use payload_sim::world::Generator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let generator: Generator = args.next().as_deref().unwrap_or("closed_tank").parse()?;
    let mut config = MissionConfig::bundled(generator);
    config.output_dir = args.next().map(Into::into);
    let run = run_mission(&config)?;
    print!("{}", run.report.to_text());
    if let Some(dir) = &config.output_dir {
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}
