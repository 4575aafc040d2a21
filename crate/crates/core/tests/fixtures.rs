use std::path::PathBuf;

use trajspace::scene::validate;
use trajspace::tspace::{betti, build_complex_2d, build_complex_3d, fiber_statistics, filtration};
use trajspace::Scene;

fn fixture(name: &str) -> Scene {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(format!("{name}.json"));
    Scene::from_path(path).unwrap()
}

const PLANAR: [&str; 7] = [
    "disk",
    "annulus",
    "disk_horizontal",
    "disk_parabolic",
    "annulus_tilted",
    "annulus_sheared",
    "disk_pair",
];

#[test]
fn planar_fixtures_validate_and_match_reference_betti() {
    for name in PLANAR {
        let s = fixture(name);
        let report = validate(&s);
        assert!(report.passed, "{name}: {:?}", report.failures);
        let cx = build_complex_2d(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(betti(&cx).unwrap(), s.reference_betti().unwrap(), "{name}");
        assert!(fiber_statistics(&cx).ok(), "{name}");
        for k in 1..3 {
            assert!(filtration(&cx, k + 1).is_subset(&filtration(&cx, k)), "{name}");
        }
    }
}

#[test]
fn non_lyapunov_fixture_fails_validation() {
    assert!(!validate(&fixture("disk_nonlyapunov")).passed);
}

#[test]
fn spatial_fixtures_respect_fiber_bounds() {
    for name in ["ball", "solid_torus"] {
        let s = fixture(name);
        assert!(validate(&s).passed, "{name}");
        let cx = build_complex_3d(&s, 2000, 11).unwrap();
        let stats = fiber_statistics(&cx);
        assert!(stats.ok(), "{name}: {:?}", stats.violations);
        assert!(stats.max_fiber <= 4);
    }
}
