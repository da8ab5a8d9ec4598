//! Whitespace-separated ASCII formats: point clouds, trajectories, planned
//! paths, iteration traces and per-node debug records.
//!
//! Readers skip blank lines and `#` comments.

use std::fmt::Write;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geom::{RobotPoseSample, RotationMatrix};
use crate::planner::{PathNode, TraceEntry};
use crate::support::SupportEstimate;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn numbers(line: usize, fields: &[&str], expect: usize) -> Result<Vec<f64>, ParseError> {
    if fields.len() != expect {
        return Err(ParseError { line, message: format!("expected {expect} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError { line, message: format!("not a finite number: {f:?}") }),
        })
        .collect()
}

/// Reads `x y z` records.
pub fn parse_point_cloud(text: &str) -> Result<Vec<Vector3<f64>>, ParseError> {
    records(text).map(|(line, f)| numbers(line, &f, 3).map(|v| Vector3::new(v[0], v[1], v[2]))).collect()
}

pub fn format_point_cloud(points: &[Vector3<f64>]) -> String {
    let mut out = String::from("# x y z\n");
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    out
}

/// Reads `t x y z r00 r01 r02 r10 r11 r12 r20 r21 r22` records with strictly
/// increasing time and orthonormal rotations.
pub fn parse_trajectory(text: &str) -> Result<Vec<RobotPoseSample>, ParseError> {
    let mut out: Vec<RobotPoseSample> = Vec::new();
    for (line, f) in records(text) {
        let v = numbers(line, &f, 13)?;
        let rotation = RotationMatrix::new(Matrix3::from_row_slice(&v[4..13]))
            .map_err(|e| ParseError { line, message: e.to_string() })?;
        if out.last().is_some_and(|s| v[0] <= s.time) {
            return Err(ParseError { line, message: "time must increase strictly".into() });
        }
        out.push(RobotPoseSample { time: v[0], position: Vector3::new(v[1], v[2], v[3]), rotation });
    }
    Ok(out)
}

pub fn format_trajectory(samples: &[RobotPoseSample]) -> String {
    let mut out = String::from("# t x y z r00 r01 r02 r10 r11 r12 r20 r21 r22\n");
    for s in samples {
        write!(out, "{} {} {} {}", s.time, s.position.x, s.position.y, s.position.z).unwrap();
        for r in s.rotation.to_row_major() {
            write!(out, " {r}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// One line per node: `x y z roll pitch tau cost`.
pub fn format_path(path: &[PathNode]) -> String {
    let mut out = String::from("# x y z roll pitch tau cost\n");
    for n in path {
        let s = &n.estimate.s_plane;
        writeln!(
            out,
            "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            s.x, s.y, s.z, s.roll, s.pitch, n.estimate.tau, n.cost
        )
        .unwrap();
    }
    out
}

/// One line per iteration: `iter best_cost tree_size obstacles`; iterations
/// that pruned nodes are preceded by a `# prune` comment.
pub fn format_trace(trace: &[TraceEntry]) -> String {
    let mut out = String::from("# iter best_cost tree_size obstacles\n");
    for t in trace {
        if t.pruned > 0 {
            writeln!(out, "# prune iter={} removed={}", t.iter, t.pruned).unwrap();
        }
        writeln!(out, "{} {:.6} {} {}", t.iter, t.best_cost, t.tree_size, t.obstacles).unwrap();
    }
    out
}

pub const DEBUG_HEADER: &str = "# x y z_surf z_pro z_ep z_s var_z_pro var_z_ep w_z roll pitch tau is_obstacle";

/// `x y z_surf z_pro z_ep z_s var_z_pro var_z_ep w_z roll pitch tau is_obstacle`;
/// missing sources print as `nan`.
pub fn format_debug_record(e: &SupportEstimate) -> String {
    let nan = f64::NAN;
    let s = &e.s_plane;
    let (z_pro, var_pro) = e.pro_plane.map_or((nan, nan), |p| (p.z, p.var_z));
    let (z_ep, var_ep) = e.ep_plane.map_or((nan, nan), |p| (p.z, p.var_z));
    format!(
        "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6e} {:.6e} {:.6} {:.6} {:.6} {:.6} {}",
        s.x,
        s.y,
        e.surf_plane.z,
        z_pro,
        z_ep,
        s.z,
        var_pro,
        var_ep,
        e.w_z().unwrap_or(nan),
        s.roll,
        s.pitch,
        e.tau,
        u8::from(e.is_obstacle)
    )
}
