use std::path::Path;

use tdho::io::RunConfig;
use tdho::recon::{compare_potentials, disk_mask};
use tdho_web::{element, preview, row};

fn config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs/two_bump.json");
    RunConfig::load(&path).unwrap()
}

#[test]
fn element_matches_the_core_library() {
    let cfg = config();
    let e = element(&cfg, 0.3, -0.4, 32.0).unwrap();
    let direct = tdho::io::cmd_element(&cfg, 0.3, -0.4, 32.0, None).unwrap();
    assert_eq!((e.re, e.im, e.t_star), (direct.value.re, direct.value.im, direct.t_star));
}

#[test]
fn scanned_row_follows_its_limit() {
    let cfg = config();
    let r = row(&cfg, 1.0, 32.0, 9).unwrap();
    assert_eq!(r.offsets.len(), 9);
    assert_eq!(r.offsets[0], -4.0);
    let peak = r.limit.iter().cloned().fold(0.0, f64::max);
    for (e, l) in r.scattered.iter().zip(&r.limit) {
        assert!((e.re - l).abs() < 0.03 * peak, "{} vs {l}", e.re);
    }
}

#[test]
fn preview_resembles_the_phantom() {
    let cfg = config();
    let (f, g) = preview(&cfg, 32, 64).unwrap();
    let m = compare_potentials(&f, &g, &disk_mask(&f.grid, 3.0)).unwrap();
    assert!(m.relative_l2 < 0.15, "{m:?}");
    assert!(preview(&cfg, 8, 64).is_err());
}
