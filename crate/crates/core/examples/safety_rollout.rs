//! Flies the drifting corridor with and without the safety policy, then a
//! cluttered room path with drift.

use payload_sim::collision::RobotBox;
use payload_sim::geometry::Vec3;
use payload_sim::safety::{adversarial_corridor, clear_path, rollout, DriftModel, Provenance, RolloutParams, ADVERSARIAL_DRIFT};
use payload_sim::world::{build_scenario, Generator, ScenarioDescriptor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (world, path) = adversarial_corridor();
    let goal = path.last().expect("corridor path").position;
    for filter in [false, true] {
        let r = rollout(&world, &path, &goal, &RolloutParams { filter, drift: ADVERSARIAL_DRIFT, ..Default::default() });
        println!("corridor filter={filter:<5} collisions {:>3} reached {} ticks {}", r.collisions, r.reached, r.rows.len());
    }

    let world = build_scenario(&ScenarioDescriptor::bundled(Generator::ClutteredRoom))?;
    let goal = world.goal().expect("cluttered room has a goal");
    let clearance = RobotBox { size: Vec3::new(0.9, 0.9, 0.5) };
    let Some(path) = clear_path(&world, world.start_pose(), &goal, clearance, 0) else {
        println!("no clear path to the goal");
        return Ok(());
    };
    let params = RolloutParams { drift: DriftModel { rate: 0.02, seed: 4 }, ..Default::default() };
    let r = rollout(&world, &path, &goal, &params);
    let stops = r.rows.iter().filter(|row| row.command.provenance != Provenance::Nominal).count();
    println!("cluttered drift=0.02 collisions {} reached {} filtered ticks {stops}/{}", r.collisions, r.reached, r.rows.len());
    Ok(())
}
