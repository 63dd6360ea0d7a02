//! One local planning step in the tunnel network: sample a graph around the
//! start, score every vertex and pick the best path.

use payload_sim::collision::RobotBox;
use payload_sim::explore::{exploration_gain, sample_local_graph, select_best_path, GainParams, LocalGraphParams};
use payload_sim::geometry::{Aabb, Pose, Vec3};
use payload_sim::map::{MapParams, OccupancyMap};
use payload_sim::world::{build_scenario, render_frame, Generator, ScenarioDescriptor, SensorModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = build_scenario(&ScenarioDescriptor::bundled(Generator::TunnelNetwork))?;
    let start = *world.start_pose();
    let mut map = OccupancyMap::for_world(&world, MapParams::default())?;
    let lidar = SensorModel::lidar();
    for _ in 0..3 {
        map.integrate_scan(&start, &render_frame(&world, &start, &lidar)?, &lidar)?;
    }
    let robot = RobotBox { size: Vec3::new(1.0, 1.0, 0.5) };
    map.clear_box(&robot.at(&start.position));

    let half = Vec3::new(10.0, 10.0, 3.0);
    let bounds = Aabb::new(start.position - half, start.position + half).intersection(&map.grid().bounds());
    let graph = sample_local_graph(&map, &start, &bounds, &LocalGraphParams { robot, seed: 1, ..Default::default() })?;
    let gp = GainParams::default();
    let gains: Vec<f64> = (0..graph.len()).map(|i| exploration_gain(&map, &Pose::new(graph.position(i), graph.vertex(i).yaw), &gp)).collect();
    println!("local graph {} vertices, {} edges", graph.len(), graph.edge_count());
    match select_best_path(&graph, &gains, 0.3)? {
        Some(best) => {
            println!("best path gain {:.1}, length {:.2} m", best.exploration_gain, best.length);
            for &v in &best.vertices {
                let p = graph.position(v);
                println!("  ({:.2}, {:.2}, {:.2}) gain {:.0}", p.x, p.y, p.z, gains[v]);
            }
        }
        None => println!("nothing left to explore"),
    }
    Ok(())
}
