use std::path::{Path, PathBuf};

use statrs::distribution::{Binomial, DiscreteCDF};

use vegnav::bench::{
    corridor_queries, estimation_rmse, estimator, export_csv, prepare, run_once, run_scenario, Scenario, CSV_HEADER,
};
use vegnav::support::EstimationMode;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenarios().join(name)).unwrap()
}

/// One-sided sign test: probability of at least `wins` successes in `n` fair trials.
fn sign_test(wins: u64, n: u64) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    1.0 - Binomial::new(0.5, n).unwrap().cdf(wins - 1)
}

#[test]
fn shipped_scenarios_load() {
    let mut names: Vec<_> = std::fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for p in names {
        Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn csv_files_for_zero_and_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    export_csv(&[], &empty, false).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), format!("{CSV_HEADER}\n"));

    let mut sc = load("flat_empty.toml");
    sc.file.planner.max_iters = 300;
    let rec = run_once(&sc, EstimationMode::Fused, 0).unwrap();
    let one = dir.path().join("one.csv");
    export_csv(&[rec], &one, false).unwrap();
    let text = std::fs::read_to_string(&one).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("flat_empty,fused,0,true,"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = load("hidden_obstacle.toml");
    sc.file.seeds = vec![3, 4];
    sc.file.planner.max_iters = 500;
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    export_csv(&run_scenario(&sc, None).unwrap(), &a, false).unwrap();
    export_csv(&run_scenario(&sc, None).unwrap(), &b, false).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn trajectory_only_runs_into_the_wall() {
    let sc = load("obstacle_wall.toml");
    let runs = run_scenario(&sc, Some(EstimationMode::ProOnly)).unwrap();
    let hits = runs.iter().filter(|r| r.metrics.success && r.metrics.safety_deg == 0.0).count();
    assert!(hits > 0, "no collision course among {} runs", runs.len());
}

#[test]
fn fused_height_error_beats_canopy_only_on_rough_canopy() {
    let sc = load("rough_canopy.toml");
    assert!(sc.file.seeds.len() >= 20);
    // Estimation error over a corridor around the traverse, every seed paired.
    let mut wins = 0;
    for &seed in &sc.file.seeds {
        let inputs = prepare(&sc, seed).unwrap();
        let queries = corridor_queries(&inputs.world, &sc.file.traverse, 1.0, 200, 500 + seed);
        let rmse = |mode| estimation_rmse(&estimator(&sc, &inputs, mode, seed).unwrap(), &inputs.world, &queries).0;
        wins += u64::from(rmse(EstimationMode::Fused) < rmse(EstimationMode::SurfOnly));
    }
    let n = sc.file.seeds.len() as u64;
    assert!(sign_test(wins, n) < 0.05, "fused better on {wins}/{n}");

    // The same comparison on the planned paths, over seeds where both modes found one.
    let fused = run_scenario(&sc, Some(EstimationMode::Fused)).unwrap();
    let surf = run_scenario(&sc, Some(EstimationMode::SurfOnly)).unwrap();
    let pairs: Vec<(f64, f64)> = fused
        .iter()
        .zip(&surf)
        .filter(|(f, s)| f.metrics.success && s.metrics.success)
        .map(|(f, s)| (f.metrics.est_rmse_z, s.metrics.est_rmse_z))
        .collect();
    let path_wins = pairs.iter().filter(|(f, s)| f < s).count() as u64;
    assert!(sign_test(path_wins, pairs.len() as u64) < 0.05, "fused better on {path_wins}/{} paths", pairs.len());
}
