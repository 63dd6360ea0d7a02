//! Plans a full inspection of the closed tank over its ground-truth map.

use payload_sim::collision::RobotBox;
use payload_sim::geometry::Vec3;
use payload_sim::inspect::{plan_inspection, InspectionParams, TourParams};
use payload_sim::map::{MapParams, OccupancyMap};
use payload_sim::world::{build_scenario, Generator, ScenarioDescriptor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = build_scenario(&ScenarioDescriptor::bundled(Generator::ClosedTank))?;
    let map = OccupancyMap::from_ground_truth(&world, MapParams::default())?;
    let robot = RobotBox { size: Vec3::new(1.0, 1.0, 0.5) };
    let ip = InspectionParams { robot, max_height: Some(3.0), seed: 1, ..Default::default() };
    let tp = TourParams { robot, max_height: Some(3.0), seed: 1, ..Default::default() };
    let plan = plan_inspection(&map, world.start_pose(), &ip, &tp)?;
    println!("surfaces    {}", plan.surfaces.len());
    println!("candidates  {}", plan.candidates.candidates.len());
    println!("cover       {} viewpoints, {} uncovered", plan.cover.selected.len(), plan.cover.uncovered.len());
    println!("tour        {:.1} m through {} waypoints, {} unreachable", plan.tour.length, plan.tour.path.len(), plan.tour.unreachable.len());
    println!("coverage    {:.4}", plan.coverage());
    Ok(())
}
