use std::fs;
use std::path::Path;

use brwlab::harness::{export_cf_tables, gw_heyde, read_weights};

fn rows(text: &str) -> Vec<[f64; 3]> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t,"))
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn gw_heyde_mixture_table_matches_golden_file() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let config = gw_heyde();
    let weights = read_weights(&fixtures.join("mix_weights.txt"), config.policy.horizon).unwrap();
    assert_eq!(weights.len(), 400);
    let dir = tempfile::tempdir().unwrap();
    export_cf_tables(&config, dir.path(), Some(&weights)).unwrap();
    let ours = rows(&fs::read_to_string(dir.path().join("mixture.csv")).unwrap());
    let golden = rows(&fs::read_to_string(fixtures.join("gw_heyde_mixture.csv")).unwrap());
    assert_eq!(ours.len(), golden.len());
    for (a, b) in ours.iter().zip(&golden) {
        assert_eq!(a[0], b[0]);
        assert!((a[1] - b[1]).abs() <= 1e-10, "re at t = {}: {} vs {}", a[0], a[1], b[1]);
        assert!((a[2] - b[2]).abs() <= 1e-10, "im at t = {}: {} vs {}", a[0], a[2], b[2]);
    }
}
