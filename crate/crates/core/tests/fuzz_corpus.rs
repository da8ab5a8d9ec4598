//! Replays the checked-in fuzz corpus through the parsers so a regression in
//! any seed shows up in an ordinary test run.

use std::path::{Path, PathBuf};

use vegnav::bench::parse_scenario;
use vegnav::io::{format_point_cloud, format_trajectory, parse_point_cloud, parse_trajectory};
use vegnav::world::parse_world_spec;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn check(target: &str, rejected: &[&str], parses: impl Fn(&str) -> bool) {
    for (name, text) in seeds(target) {
        let expect = !rejected.contains(&name.as_str());
        assert_eq!(parses(&text), expect, "{target}/{name}");
    }
}

#[test]
fn point_cloud_seeds() {
    check("point_cloud", &["short_line.xyz", "non_finite.xyz"], |t| match parse_point_cloud(t) {
        Ok(p) => {
            assert_eq!(parse_point_cloud(&format_point_cloud(&p)).unwrap(), p);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn trajectory_seeds() {
    check("trajectory", &["repeated_time.txt", "not_rotation.txt"], |t| match parse_trajectory(t) {
        Ok(s) => {
            assert_eq!(parse_trajectory(&format_trajectory(&s)).unwrap(), s);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn world_spec_seeds() {
    check("world_spec", &["inverted_bounds.toml", "truncated.toml"], |t| parse_world_spec(t).is_ok());
}

#[test]
fn scenario_seeds() {
    check("scenario", &["bad_start.toml", "unknown_key.toml"], |t| parse_scenario(t).is_ok());
}
