use std::collections::BTreeMap;
use std::path::Path;

use payload_sim::mission::{
    compute_metrics, load_map, read_trajectory_csv, run_mission, save_map, MissionConfig, MissionError, MissionLog, Mode,
};
use payload_sim::world::{build_scenario, Generator};

fn explore_home(generator: Generator) -> MissionConfig {
    let mut c = MissionConfig::bundled(generator);
    c.modes = vec![Mode::Explore, Mode::Home];
    c
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn output_set_is_byte_identical_across_runs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut sets = Vec::new();
    for d in &dirs {
        let mut c = explore_home(Generator::EmptyRoom);
        c.output_dir = Some(d.path().to_path_buf());
        run_mission(&c).unwrap();
        sets.push(read_dir(d.path()));
    }
    let names: Vec<&String> = sets[0].keys().collect();
    assert_eq!(names, ["config.toml", "map.bin", "metrics.csv", "report.txt", "sync_stats.csv", "trajectory.csv"]);
    assert_eq!(sets[0], sets[1]);
}

#[test]
fn replayed_metrics_match_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = explore_home(Generator::ClutteredRoom);
    c.output_dir = Some(dir.path().to_path_buf());
    let run = run_mission(&c).unwrap();

    let config = MissionConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(config, MissionConfig { output_dir: None, ..c });
    let world = build_scenario(&config.scenario).unwrap();
    let ticks = read_trajectory_csv(std::fs::File::open(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    let map = load_map(&dir.path().join("map.bin")).unwrap();
    let m = compute_metrics(&MissionLog { start: *world.start_pose(), ticks, map, coverage: None }, &world);
    let r = &run.report;
    assert_eq!((m.explored_free, m.reachable_free, m.collisions, m.false_free), (r.explored_free, r.reachable_free, 0, 0));
    // The trajectory is written to micrometres.
    assert!((m.path_length - r.path_length).abs() < 1e-3);
    assert!((m.final_offset - r.final_offset).abs() < 1e-5);
    assert!((m.max_commanded_z - r.max_commanded_z).abs() < 1e-5);
}

#[test]
fn exploration_never_loses_knowledge() {
    for g in [Generator::ClutteredRoom, Generator::ClosedTank] {
        let run = run_mission(&explore_home(g)).unwrap();
        assert!(!run.explore_steps.is_empty());
        let mut last = 0;
        for s in &run.explore_steps {
            assert!(s.known_before >= last && s.known_after >= s.known_before, "{g:?}: {s:?}");
            last = s.known_after;
        }
        let productive = run.explore_steps.iter().filter(|s| s.known_after > s.known_before).count();
        assert!(productive * 10 >= run.explore_steps.len() * 9, "{g:?}: {productive}/{}", run.explore_steps.len());
    }
}

#[test]
fn commanded_height_respects_the_cap() {
    let mut c = explore_home(Generator::ClutteredRoom);
    c.max_height = 2.0;
    let run = run_mission(&c).unwrap();
    let top = run.log.ticks.iter().map(|t| t.target.z).fold(f64::NEG_INFINITY, f64::max);
    assert!(top <= 2.0 + 1e-9, "commanded z {top}");
    assert_eq!(run.report.max_commanded_z, top);
    assert!(run.report.final_offset <= 0.3);
}

#[test]
fn inspection_waits_for_exploration() {
    let mut c = MissionConfig::bundled(Generator::TunnelNetwork);
    c.limits.explore = 5.0;
    let run = run_mission(&c).unwrap();
    let outcomes: Vec<(Mode, &str)> = run.report.phases.iter().map(|p| (p.mode, p.outcome.as_str())).collect();
    assert_eq!(outcomes[..2], [(Mode::Explore, "timeout"), (Mode::Inspect, "skipped")]);
    assert_eq!(run.report.phases[1].ticks, 0);
    assert!(run.inspection.is_none());
    assert!(run.log.ticks.iter().all(|t| t.phase != Mode::Inspect));

    // With exploration complete, every inspect tick follows every explore tick.
    let run = run_mission(&MissionConfig::bundled(Generator::ClosedTank)).unwrap();
    let last_explore = run.log.ticks.iter().rposition(|t| t.phase == Mode::Explore).unwrap();
    let first_inspect = run.log.ticks.iter().position(|t| t.phase == Mode::Inspect).unwrap();
    assert!(last_explore < first_inspect);
    assert_eq!(run.report.explore_complete, Some(true));
}

#[test]
fn prior_map_inspection_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut explore = MissionConfig::bundled(Generator::ClosedTank);
    explore.modes = vec![Mode::Explore];
    explore.output_dir = Some(dir.path().join("explore"));
    let first = run_mission(&explore).unwrap();

    let text = format!(
        "name = \"reinspect\"\nmodes = [\"inspect\", \"home\"]\nprior_map = {:?}\nbounds = {{ min = [0, 0, 0], max = [10, 8, 4.4] }}\n\n[scenario]\ngenerator = \"closed_tank\"\nseed = 1\ndims = [10.0, 8.0, 4.4]\n",
        dir.path().join("explore/map.bin")
    );
    let path = dir.path().join("reinspect.toml");
    std::fs::write(&path, text).unwrap();
    let run = run_mission(&MissionConfig::load(&path).unwrap()).unwrap();
    assert!(run.report.coverage_fraction.unwrap() >= 0.95);
    assert_eq!(run.report.explore_complete, None);
    assert!(run.report.final_offset <= 0.3);
    // Scans taken during reinspection keep the map sound.
    assert_eq!(run.report.false_free, 0);
    assert!(run.report.explored_free >= first.report.explored_free);
}

#[test]
fn prior_map_must_match_the_scenario_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let room = build_scenario(&MissionConfig::bundled(Generator::EmptyRoom).scenario).unwrap();
    let path = dir.path().join("room.bin");
    save_map(&payload_sim::map::OccupancyMap::for_world(&room, Default::default()).unwrap(), &path).unwrap();
    let mut c = MissionConfig::bundled(Generator::ClosedTank);
    c.modes = vec![Mode::Inspect];
    c.prior_map = Some(path);
    let err = run_mission(&c).unwrap_err();
    assert!(matches!(err, MissionError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}
