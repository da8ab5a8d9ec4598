//! Scenario runs, comparison metrics and CSV export.

mod scenario;

use std::fmt::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use scenario::{parse_scenario, Scenario, ScenarioFile};

use crate::config::ConfigError;
use crate::geom::{point_segment_distance, PointCloudIndex, TrajectoryHistory};
use crate::planner::{plan, PlanError, PlanResult};
use crate::support::{EstimationMode, SupportError, SupportEstimator};
use crate::world::{sample_cloud, simulate_traverse, WorldError, WorldModel};

/// Independent stream seed derived from a run seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_CLOUD: u64 = 1;
const STREAM_TRAVERSE: u64 = 2;
const STREAM_RANSAC: u64 = 3;
const STREAM_PLANNER: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// 2D length of the planned path (m).
    pub path_len: f64,
    /// Smallest horizontal distance from the path to a true obstacle (m).
    pub safety_deg: f64,
    /// Wall time of planning (s).
    pub comp_time: f64,
    /// Height error of the path's support planes against the ground (m).
    pub est_rmse_z: f64,
    /// Slope error of the path's support planes (rad).
    pub est_rmse_slope: f64,
    pub success: bool,
}

impl RunMetrics {
    fn failed(comp_time: f64) -> Self {
        Self {
            path_len: f64::NAN,
            safety_deg: f64::NAN,
            comp_time,
            est_rmse_z: f64::NAN,
            est_rmse_slope: f64::NAN,
            success: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub mode: EstimationMode,
    pub seed: u64,
    pub metrics: RunMetrics,
    /// Wall time of model fitting (s).
    pub fit_time: f64,
    pub outcome: Result<PlanResult, PlanError>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("world: {0}")]
    World(#[from] WorldError),
    #[error("model fitting failed: {0}")]
    Support(#[from] SupportError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Everything a planning run needs for one seed.
pub struct RunInputs {
    pub world: WorldModel,
    pub cloud: PointCloudIndex,
    pub history: TrajectoryHistory,
}

/// Builds the cloud and the trajectory history for `seed`.
pub fn prepare(scenario: &Scenario, seed: u64) -> Result<RunInputs, BenchError> {
    let world = scenario.world.world();
    let noise = scenario.noise();
    let base = derive_seed(scenario.world.seed, seed);
    let cloud = match &scenario.cloud {
        Some(points) => PointCloudIndex::new(points.clone()),
        None => {
            let region = scenario.file.cloud_region.unwrap_or(world.bounds);
            sample_cloud(&world, &noise, &region, derive_seed(base, STREAM_CLOUD))?
        }
    };
    let history = match &scenario.trajectory {
        Some(samples) => {
            let mut h = TrajectoryHistory::new(scenario.file.history);
            for s in samples {
                h.push(*s).map_err(|e| ConfigError::Invalid(format!("trajectory: {e}")))?;
            }
            h
        }
        None => simulate_traverse(
            &world,
            &noise,
            &scenario.file.traverse,
            scenario.file.stride,
            derive_seed(base, STREAM_TRAVERSE),
            scenario.file.history,
        )?,
    };
    Ok(RunInputs { world, cloud, history })
}

/// Builds the estimator for one run; the RANSAC seed follows the run seed.
pub fn estimator<'a>(
    scenario: &Scenario,
    inputs: &'a RunInputs,
    mode: EstimationMode,
    seed: u64,
) -> Result<SupportEstimator<'a>, SupportError> {
    let mut cfg = scenario.file.estimation;
    cfg.surf.seed = derive_seed(derive_seed(scenario.world.seed, seed), STREAM_RANSAC);
    SupportEstimator::build(mode, &inputs.cloud, &inputs.history, cfg)
}

fn rmse(errors: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for e in errors {
        s += e * e;
        n += 1;
    }
    (s / n as f64).sqrt()
}

/// Minimum clearance between a 2D polyline and the true obstacles.
pub fn path_safety(world: &WorldModel, pts: &[Vector2<f64>]) -> f64 {
    match pts {
        [] => f64::INFINITY,
        [p] => world.clearance(p),
        _ => pts.windows(2).map(|w| world.segment_clearance(&w[0], &w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Scores a planned path against the world's ground truth.
pub fn score(world: &WorldModel, result: &PlanResult, comp_time: f64) -> RunMetrics {
    let pts: Vec<Vector2<f64>> = result.path.iter().map(|n| n.estimate.s_plane.xy()).collect();
    let truth: Vec<_> = pts.iter().map(|p| world.ground_truth_plane(p.x, p.y)).collect();
    let pairs =
        || result.path.iter().zip(&truth).filter_map(|(n, t)| t.as_ref().ok().map(|t| (&n.estimate.s_plane, t)));
    RunMetrics {
        path_len: result.length,
        safety_deg: path_safety(world, &pts),
        comp_time,
        est_rmse_z: rmse(pairs().map(|(s, t)| s.z - t.z)),
        est_rmse_slope: rmse(pairs().map(|(s, t)| s.slope() - t.slope())),
        success: true,
    }
}

/// Runs one (mode, seed) pair end to end.
pub fn run_once(scenario: &Scenario, mode: EstimationMode, seed: u64) -> Result<RunRecord, BenchError> {
    let inputs = prepare(scenario, seed)?;
    let fit_start = Instant::now();
    let est = estimator(scenario, &inputs, mode, seed)?;
    let fit_time = fit_start.elapsed().as_secs_f64();
    let f = &scenario.file;
    let mut cfg = f.planner;
    cfg.seed = derive_seed(derive_seed(scenario.world.seed, seed), STREAM_PLANNER);
    let start = Instant::now();
    let outcome = plan(&est, inputs.world.bounds, Vector2::from(f.start), Vector2::from(f.goal), cfg);
    let comp_time = start.elapsed().as_secs_f64();
    let metrics = match &outcome {
        Ok(r) => score(&inputs.world, r, comp_time),
        Err(_) => RunMetrics::failed(comp_time),
    };
    Ok(RunRecord { scenario: scenario.name.clone(), mode, seed, metrics, fit_time, outcome })
}

/// Runs every (mode, seed) pair, seeds in parallel. Records come back in
/// mode-then-seed order.
pub fn run_scenario(scenario: &Scenario, only: Option<EstimationMode>) -> Result<Vec<RunRecord>, BenchError> {
    let jobs: Vec<(EstimationMode, u64)> =
        scenario.modes(only).into_iter().flat_map(|m| scenario.file.seeds.iter().map(move |s| (m, *s))).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let mut slots: Vec<Option<Result<RunRecord, BenchError>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let jobs = &jobs;
                scope.spawn(move || {
                    (w..jobs.len())
                        .step_by(workers)
                        .map(|i| (i, run_once(scenario, jobs[i].0, jobs[i].1)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("bench worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

/// Mean and sample standard deviation of one metric over successful runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// `mean±std`, or `n/a` when no finite value was seen.
    pub fn display(&self, precision: usize) -> String {
        if self.n == 0 {
            "n/a".into()
        } else {
            format!("{:.p$}±{:.p$}", self.mean, self.std, p = precision)
        }
    }
}

/// Summary of the finite values; infinite clearances (no obstacles) are skipped.
pub fn summarize(values: impl IntoIterator<Item = f64>) -> Summary {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    Summary { mean, std: var.sqrt(), n }
}

/// Human-readable per-(scenario, mode) aggregate.
pub fn format_summary(records: &[RunRecord]) -> String {
    let mut out = String::new();
    let mut keys: Vec<(&str, EstimationMode)> = records.iter().map(|r| (r.scenario.as_str(), r.mode)).collect();
    keys.dedup();
    for (name, mode) in keys {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.scenario == name && r.mode == mode).collect();
        let ok: Vec<&&RunRecord> = rs.iter().filter(|r| r.metrics.success).collect();
        let m = |f: fn(&RunMetrics) -> f64| summarize(ok.iter().map(|r| f(&r.metrics)));
        writeln!(
            out,
            "{name} {mode}: success {}/{}  path_len {}  safety_deg {}  est_rmse_z {}",
            ok.len(),
            rs.len(),
            m(|x| x.path_len).display(3),
            m(|x| x.safety_deg).display(3),
            m(|x| x.est_rmse_z).display(4),
        )
        .unwrap();
    }
    out
}

pub const CSV_HEADER: &str = "scenario,mode,seed,success,path_len,safety_deg,comp_time,est_rmse_z,est_rmse_slope";

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// CSV text, one row per record in the given order. Wall-clock times are
/// only written when `timing` is set, so the default output is reproducible
/// byte for byte.
pub fn format_csv(records: &[RunRecord], timing: bool) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.mode,
            r.seed,
            m.success,
            field(m.path_len),
            field(m.safety_deg),
            if timing { field(m.comp_time) } else { String::new() },
            field(m.est_rmse_z),
            field(m.est_rmse_slope)
        )
        .unwrap();
    }
    out
}

pub fn export_csv(records: &[RunRecord], path: &Path, timing: bool) -> Result<(), BenchError> {
    std::fs::write(path, format_csv(records, timing))
        .map_err(|source| BenchError::Io { path: path.display().to_string(), source })
}

/// `n` query points within `width` of the polyline `traverse`, inside the
/// world bounds.
pub fn corridor_queries(
    world: &WorldModel,
    traverse: &[[f64; 2]],
    width: f64,
    n: usize,
    seed: u64,
) -> Vec<Vector2<f64>> {
    let pts: Vec<Vector2<f64>> = traverse.iter().map(|p| Vector2::from(*p)).collect();
    let lo = pts.iter().fold(Vector2::repeat(f64::INFINITY), |a, p| a.inf(p)) - Vector2::repeat(width);
    let hi = pts.iter().fold(Vector2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p)) + Vector2::repeat(width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let q = Vector2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        let near = pts.windows(2).any(|w| point_segment_distance(&q, &w[0], &w[1]) <= width);
        if near && world.bounds.contains(q.x, q.y) {
            out.push(q);
        }
    }
    out
}

/// Height and slope RMSE of the support estimates at `queries`, skipping
/// points where estimation fails. Also returns the number of skipped points.
pub fn estimation_rmse(est: &SupportEstimator<'_>, world: &WorldModel, queries: &[Vector2<f64>]) -> (f64, f64, usize) {
    let mut ez = Vec::new();
    let mut es = Vec::new();
    for q in queries {
        if let (Ok(e), Ok(t)) = (est.estimate(q), world.ground_truth_plane(q.x, q.y)) {
            ez.push(e.s_plane.z - t.z);
            es.push(e.s_plane.slope() - t.slope());
        }
    }
    let skipped = queries.len() - ez.len();
    (rmse(ez.into_iter()), rmse(es.into_iter()), skipped)
}
