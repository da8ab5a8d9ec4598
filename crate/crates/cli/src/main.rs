//! `vegnav` command-line harness.
//!
//! Exit codes: 0 on success, 1 when the planner found no path on any seed,
//! 2 on configuration or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vegnav::bench::{export_csv, format_csv, format_summary, run_once, run_scenario, RunRecord, Scenario};
use vegnav::io::{format_debug_record, format_path, format_point_cloud, format_trace, DEBUG_HEADER};
use vegnav::support::EstimationMode;
use vegnav::world::{parse_world_spec, sample_cloud};

#[derive(Parser)]
#[command(name = "vegnav", version, about = "Support-plane aware planning over vegetated terrain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and optionally write the path, trace and node dump.
    Plan {
        scenario: PathBuf,
        /// Estimation mode; defaults to the scenario's, or all three.
        #[arg(long)]
        mode: Option<EstimationMode>,
        /// Run only this seed instead of the scenario's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include wall-clock planning times in the CSV.
        #[arg(long)]
        timing: bool,
    },
    /// Run every scenario file in a directory and write results.csv.
    Bench {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<EstimationMode>,
        #[arg(long)]
        timing: bool,
    },
    /// Sample a world's point cloud to an ASCII "x y z" file.
    DumpWorld {
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the world's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    NoPath,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NoPath) => {
            eprintln!("vegnav: no path found on any seed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("vegnav: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Plan { scenario, mode, seed, out, timing } => plan(&scenario, mode, seed, out.as_deref(), timing),
        Command::Bench { dir, out, mode, timing } => bench(&dir, &out, mode, timing),
        Command::DumpWorld { world, out, seed } => dump_world(&world, &out, seed),
    }
}

fn status(records: &[RunRecord]) -> Status {
    if !records.is_empty() && records.iter().all(|r| !r.metrics.success) {
        Status::NoPath
    } else {
        Status::Ok
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn plan(
    path: &Path,
    mode: Option<EstimationMode>,
    seed: Option<u64>,
    out: Option<&Path>,
    timing: bool,
) -> Result<Status> {
    let scenario = Scenario::load(path)?;
    let records = match seed {
        Some(s) => {
            scenario.modes(mode).into_iter().map(|m| run_once(&scenario, m, s)).collect::<Result<Vec<_>, _>>()?
        }
        None => run_scenario(&scenario, mode)?,
    };
    print!("{}", format_summary(&records));
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("metrics.csv"), &format_csv(&records, timing))?;
        for r in &records {
            let Ok(result) = &r.outcome else { continue };
            let stem = format!("{}_{}_{}", r.scenario, r.mode, r.seed);
            write(&dir.join(format!("{stem}_path.txt")), &format_path(&result.path))?;
            write(&dir.join(format!("{stem}_trace.txt")), &format_trace(&result.trace))?;
            let mut nodes = format!("{DEBUG_HEADER}\n");
            for n in &result.path {
                nodes.push_str(&format_debug_record(&n.estimate));
                nodes.push('\n');
            }
            write(&dir.join(format!("{stem}_nodes.txt")), &nodes)?;
        }
    }
    Ok(status(&records))
}

/// Top-level `*.toml` files of `dir`, sorted by name.
fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "toml") {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("{}: no scenario files", dir.display());
    }
    Ok(files)
}

fn bench(dir: &Path, out: &Path, mode: Option<EstimationMode>, timing: bool) -> Result<Status> {
    let mut records = Vec::new();
    for file in scenario_files(dir)? {
        let scenario = Scenario::load(&file)?;
        records.extend(run_scenario(&scenario, mode)?);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    export_csv(&records, &out.join("results.csv"), timing)?;
    print!("{}", format_summary(&records));
    Ok(status(&records))
}

fn dump_world(path: &Path, out: &Path, seed: Option<u64>) -> Result<Status> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = parse_world_spec(&text).with_context(|| path.display().to_string())?;
    let world = spec.world();
    let cloud = sample_cloud(&world, &spec.noise, &world.bounds, seed.unwrap_or(spec.seed))?;
    write(out, &format_point_cloud(cloud.points()))?;
    eprintln!("{} points written to {}", cloud.len(), out.display());
    Ok(Status::Ok)
}
