//! Checks that every bundled scenario file parses, validates, and describes a
//! scene the solver layer can actually set up (source boxes, filters, grids).

use mpi_isr_core::config::ScenarioConfig;
use mpi_isr_core::isr::source_boxes;

/// Bundled scenario files, embedded so the test does not depend on the
/// working directory the harness chooses.
const SCENARIOS: &[(&str, &str)] = &[
    ("setup1", include_str!("../../../scenarios/setup1.json")),
    (
        "setup1_small",
        include_str!("../../../scenarios/setup1_small.json"),
    ),
    (
        "free_space_wide",
        include_str!("../../../scenarios/free_space_wide.json"),
    ),
    ("setup2", include_str!("../../../scenarios/setup2.json")),
    (
        "setup2_ghost",
        include_str!("../../../scenarios/setup2_ghost.json"),
    ),
    (
        "setup2_20ghz",
        include_str!("../../../scenarios/setup2_20ghz.json"),
    ),
];

fn scenario(name: &str) -> ScenarioConfig {
    let text = SCENARIOS.iter().find(|(n, _)| *n == name).unwrap().1;
    ScenarioConfig::from_json(text).unwrap()
}

#[test]
fn bundled_scenarios_parse_and_validate() {
    for (name, text) in SCENARIOS {
        let config = ScenarioConfig::from_json(text)
            .unwrap_or_else(|e| panic!("{name}: parse failed: {e}"));
        config
            .validate()
            .unwrap_or_else(|e| panic!("{name}: validation failed: {e}"));
    }
}

#[test]
fn bundled_scenarios_produce_source_boxes() {
    for (name, text) in SCENARIOS {
        let config = ScenarioConfig::from_json(text).unwrap();
        let scene = config.scene().unwrap();
        let settings = config.solver_settings().unwrap();
        let boxes = source_boxes(&scene, settings.max_image_order, settings.box_radius)
            .unwrap_or_else(|e| panic!("{name}: source box enumeration failed: {e}"));
        // Every scenario must at least contain the direct (order-zero) boxes.
        assert!(
            boxes.len() >= scene.sources.len(),
            "{name}: expected at least {} boxes, got {}",
            scene.sources.len(),
            boxes.len()
        );
        // All boxes must clear the sample plane by the separation margin.
        let plane = config.sample_plane().unwrap();
        for b in &boxes {
            let points = plane.points();
            for p in &points {
                let dist = (*p - b.center).norm();
                assert!(
                    dist > b.radius,
                    "{name}: box at {:?} overlaps the sample plane",
                    b.center
                );
            }
        }
    }
}

#[test]
fn bundled_scenarios_have_distinct_hashes() {
    let mut hashes: Vec<(String, String)> = Vec::new();
    for (name, text) in SCENARIOS {
        let config = ScenarioConfig::from_json(text).unwrap();
        let hash = config.hash();
        assert_eq!(hash.len(), 64, "{name}: hash is not a sha-256 hex digest");
        for (other, h) in &hashes {
            assert_ne!(&hash, h, "{name} and {other} hash identically");
        }
        hashes.push((name.to_string(), hash));
    }
}

/// The parallel-plate scenario keeps one box per first-order image: the
/// direct source plus one mirror behind each plate.
#[test]
fn parallel_plate_scenario_has_three_boxes() {
    let config = scenario("setup1");
    let scene = config.scene().unwrap();
    let settings = config.solver_settings().unwrap();
    let boxes = source_boxes(&scene, settings.max_image_order, settings.box_radius).unwrap();
    assert_eq!(boxes.len(), 3);
    // Mirrors of the origin across x = +/-0.5 sit at x = +/-1.
    let mut xs: Vec<f64> = boxes.iter().map(|b| b.center.x).collect();
    xs.sort_by(f64::total_cmp);
    assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
}

/// The four-wall scenarios rely on specific image-box counts: one identity
/// map, four first-order walls, and eight distinct two-wall sequences per
/// source.
#[test]
fn four_wall_scenario_box_counts_follow_image_theory() {
    for name in ["setup2", "setup2_ghost", "setup2_20ghz"] {
        let config = scenario(name);
        let scene = config.scene().unwrap();
        let settings = config.solver_settings().unwrap();
        let boxes = source_boxes(&scene, settings.max_image_order, settings.box_radius).unwrap();
        assert_eq!(
            boxes.len(),
            13 * scene.sources.len(),
            "{name}: wrong box count"
        );
    }
}
