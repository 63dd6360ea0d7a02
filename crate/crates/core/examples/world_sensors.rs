//! Builds each bundled scenario, renders one frame per sensor at the start
//! pose and round-trips the world snapshot.

use payload_sim::world::{build_scenario, read_snapshot, render_frame, write_snapshot, Generator, Payload, ScenarioDescriptor, SensorModel, NO_RETURN};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sensors = [SensorModel::lidar(), SensorModel::tof(), SensorModel::front_camera(), SensorModel::radar()];
    for generator in [Generator::EmptyRoom, Generator::TunnelNetwork, Generator::ClosedTank, Generator::ClutteredRoom] {
        let world = build_scenario(&ScenarioDescriptor::bundled(generator))?;
        let e = world.extents();
        let occupied = world.occupancy().iter().filter(|o| **o).count();
        println!("{:<15} {}x{}x{} voxels, {occupied} occupied, start {:?}", generator.name(), e[0], e[1], e[2], world.start_pose().position.as_slice());
        for model in &sensors {
            let frame = render_frame(&world, world.start_pose(), model)?;
            match &frame.payload {
                Payload::Depth(d) => {
                    let hits: Vec<f64> = d.ranges.iter().copied().filter(|r| *r != NO_RETURN).collect();
                    let nearest = hits.iter().copied().fold(f64::INFINITY, f64::min);
                    println!("  {:<13} {}x{} depth, {} returns, nearest {nearest:.2} m", model.name, d.rows, d.cols, hits.len());
                }
                Payload::PointCloud(p) => println!("  {:<13} {} points", model.name, p.len()),
                Payload::Inertial(_) => println!("  {:<13} inertial sample", model.name),
            }
        }
        let bytes = write_snapshot(&world);
        assert_eq!(read_snapshot(&bytes)?, world);
        println!("  snapshot      {} bytes", bytes.len());
    }
    Ok(())
}
