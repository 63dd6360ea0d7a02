//! Maps the cluttered room from a fixed set of LiDAR poses and reports
//! class counts, frontiers and the elevation summary.

use payload_sim::geometry::Pose;
use payload_sim::map::{build_elevation, extract_frontiers, MapParams, Occupancy, OccupancyMap};
use payload_sim::world::{build_scenario, render_frame, Generator, ScenarioDescriptor, SensorModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = build_scenario(&ScenarioDescriptor::bundled(Generator::ClutteredRoom))?;
    let mut map = OccupancyMap::for_world(&world, MapParams::default())?;
    let lidar = SensorModel::lidar();
    let poses = [(1.5, 1.5), (5.0, 1.5), (8.5, 1.5), (8.5, 6.5), (5.0, 6.5), (1.5, 6.5)];
    for (x, y) in poses {
        let pose = Pose::from_xyz_yaw(x, y, 1.2, 0.0);
        if world.is_occupied_at(&pose.position) {
            println!("skip ({x}, {y}): inside an obstacle");
            continue;
        }
        // Three scans per pose, since a voxel needs several free updates.
        for _ in 0..3 {
            let frame = render_frame(&world, &pose, &lidar)?;
            map.integrate_scan(&pose, &frame, &lidar)?;
        }
        println!(
            "({x:>3}, {y:>3}) free {:>6} occupied {:>6} unknown {:>6}",
            map.count(Occupancy::Free),
            map.count(Occupancy::Occupied),
            map.count(Occupancy::Unknown)
        );
    }
    let bounds = map.grid().bounds();
    println!("frontiers {}", extract_frontiers(&map, &bounds).len());
    let elevation = build_elevation(&map, &bounds);
    let known: Vec<f64> = elevation.heights.iter().copied().filter(|h| h.is_finite()).collect();
    println!("elevation {}x{} cells, {} with a floor", elevation.nx, elevation.ny, known.len());
    Ok(())
}
