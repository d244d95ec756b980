//! CSV traces and the JSON summary. Column sets are fixed; see `docs/data_dictionary.md`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::metrics::{Comparison, RunMetrics};
use crate::runner::{RunOutput, TraceRow};

fn xyz(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}_{a}"))
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

const LEGS: [&str; 4] = ["fl", "fr", "rl", "rr"];

fn per_leg_xyz(prefix: &str) -> Vec<String> {
    LEGS.iter().flat_map(|l| xyz(&format!("{prefix}_{l}"))).collect()
}

/// One trace file: its name and a header/row pair.
pub struct TraceFile {
    pub name: &'static str,
    pub header: fn() -> Vec<String>,
    row: fn(&TraceRow) -> Vec<f64>,
}

fn cat(parts: &[&[String]]) -> Vec<String> {
    std::iter::once("t".to_string()).chain(parts.iter().flat_map(|p| p.iter().cloned())).collect()
}

fn v3(v: &nalgebra::Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub const TRACE_FILES: [TraceFile; 6] = [
    TraceFile {
        name: "features.csv",
        header: || {
            cat(&[
                &["visible".into(), "frame_used".into()],
                &xyz("h_o"),
                &xyz("h_t"),
                &xyz("e"),
                &["e_norm".into()],
            ])
        },
        row: |r| {
            let l = &r.log;
            let mut v = vec![l.time, l.visible as f64, flag(l.frame_used)];
            v.extend(v3(&l.h_o));
            v.extend(v3(&l.h_t));
            v.extend(v3(&l.e));
            v.push(l.e.norm());
            v
        },
    },
    TraceFile {
        name: "observer.csv",
        header: || cat(&[&xyz("e_o"), &xyz("h_hat"), &xyz("y"), &xyz("v_t_true"), &["y_error".into(), "rejected".into()]]),
        row: |r| {
            let l = &r.log;
            let mut v = vec![l.time];
            v.extend(v3(&(l.h_o - l.h_hat)));
            v.extend(v3(&l.h_hat));
            v.extend(v3(&l.y));
            v.extend(v3(&r.target_velocity_camera));
            v.push(r.observer_error());
            v.push(flag(l.observer_rejected));
            v
        },
    },
    TraceFile {
        name: "references.csv",
        header: || {
            cat(&[
                &xyz("v_b_ref"),
                &indexed("qd_arm_ref", 6),
                &indexed("q_arm_ref", 6),
                &xyz("p_ref"),
                &["gate_open".into(), "servo_singular".into()],
            ])
        },
        row: |r| {
            let l = &r.log;
            let mut v = vec![l.time];
            v.extend(v3(&l.v_b_ref));
            v.extend(l.qd_arm_ref.iter());
            v.extend(l.q_arm_ref.iter());
            v.extend(v3(&l.p_ref));
            v.push(flag(l.gate_open));
            v.push(flag(l.servo_singular));
            v
        },
    },
    TraceFile {
        name: "forces.csv",
        header: || {
            let contacts: Vec<String> = LEGS.iter().map(|l| format!("contact_{l}")).collect();
            cat(&[
                &contacts,
                &per_leg_xyz("grf"),
                &[
                    "mpc_solved".into(),
                    "mpc_stale".into(),
                    "mpc_iterations".into(),
                    "mpc_kkt_residual".into(),
                    "mpc_constraint_residual".into(),
                ],
            ])
        },
        row: |r| {
            let l = &r.log;
            let mut v = vec![l.time];
            v.extend(l.contacts.iter().map(|c| flag(*c)));
            for f in &l.grf {
                v.extend(v3(f));
            }
            v.extend([flag(l.mpc_solved), flag(l.mpc_stale), l.mpc_iterations as f64, l.mpc_kkt, l.mpc_constraint]);
            v
        },
    },
    TraceFile {
        name: "torques.csv",
        header: || {
            let legs: Vec<String> =
                LEGS.iter().flat_map(|l| (0..3).map(move |j| format!("tau_{l}_{j}"))).collect();
            cat(&[&legs, &indexed("tau_arm", 6), &["leg_damped".into(), "arm_saturated".into()]])
        },
        row: |r| {
            let l = &r.log;
            let mut v = vec![l.time];
            for t in &l.leg_tau {
                v.extend(v3(t));
            }
            v.extend(l.arm_tau.iter());
            v.push(flag(l.leg_damped));
            v.push(flag(l.arm_saturated));
            v
        },
    },
    TraceFile {
        name: "errors.csv",
        header: || {
            cat(&[
                &xyz("ee"),
                &xyz("target"),
                &xyz("target_v"),
                &xyz("base"),
                &xyz("base_v"),
                &["tracking_error".into(), "visual_error".into()],
            ])
        },
        row: |r| {
            let mut v = vec![r.time()];
            v.extend(v3(&r.end_effector));
            v.extend(v3(&r.target_position));
            v.extend(v3(&r.target_velocity));
            v.extend(v3(&r.base_position));
            v.extend(v3(&r.base_velocity));
            v.push(r.tracking_error());
            v.push(r.log.e.norm());
            v
        },
    },
];

pub const COMPARISON_FILE: &str = "comparison.csv";

pub fn comparison_header() -> Vec<String> {
    [
        "scenario",
        "mode_a",
        "mode_b",
        "rms_a",
        "rms_b",
        "max_a",
        "max_b",
        "steady_max_a",
        "steady_max_b",
        "converged_a",
        "converged_b",
        "tracking_lost_a",
        "tracking_lost_b",
        "rms_difference",
        "max_difference",
        "steady_ratio",
    ]
    .map(String::from)
    .to_vec()
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.into(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.into(), source }
}

/// `{}` formatting gives the shortest round-trip representation, so files are
/// byte-identical whenever the numbers are.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

#[derive(Serialize)]
struct Timing {
    wall_clock_seconds: f64,
    mpc_solve_mean_seconds: f64,
    mpc_solve_max_seconds: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    metrics: &'a RunMetrics,
    timing: Timing,
}

/// Writes the six trace files and `summary.json` into `dir`. Returns the written paths.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for file in &TRACE_FILES {
        let path = dir.join(file.name);
        write_csv(&path, &(file.header)(), run.trace.iter().map(|r| (file.row)(r).into_iter().map(fmt).collect()))?;
        written.push(path);
    }
    let solves: Vec<f64> = run.trace.iter().filter(|r| r.log.mpc_solved).map(|r| r.log.mpc_solve_seconds).collect();
    let summary = Summary {
        metrics: &run.metrics,
        timing: Timing {
            wall_clock_seconds: run.wall_clock,
            mpc_solve_mean_seconds: if solves.is_empty() { 0.0 } else { solves.iter().sum::<f64>() / solves.len() as f64 },
            mpc_solve_max_seconds: solves.iter().copied().fold(0.0, f64::max),
        },
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary always serializes");
    std::fs::write(&path, text + "\n").map_err(io(&path))?;
    written.push(path);
    let path = dir.join("config.toml");
    std::fs::write(&path, run.config.to_toml_string()).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

/// Reads the metrics back from a `summary.json`.
pub fn read_summary(path: &Path) -> Result<RunMetrics, HarnessError> {
    #[derive(serde::Deserialize)]
    struct Partial {
        metrics: RunMetrics,
    }
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let p: Partial =
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse { path: path.into(), message: e.to_string() })?;
    Ok(p.metrics)
}

pub fn write_comparison(path: &Path, rows: &[Comparison]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io(parent))?;
    }
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
    write_csv(
        path,
        &comparison_header(),
        rows.iter().map(|c| {
            vec![
                c.scenario.clone(),
                c.mode_a.label().into(),
                c.mode_b.label().into(),
                fmt(c.rms_a),
                fmt(c.rms_b),
                fmt(c.max_a),
                fmt(c.max_b),
                fmt(c.steady_max_a),
                fmt(c.steady_max_b),
                c.converged_a.to_string(),
                c.converged_b.to_string(),
                opt(c.tracking_lost_a),
                opt(c.tracking_lost_b),
                fmt(c.rms_difference),
                fmt(c.max_difference),
                fmt(c.steady_ratio),
            ]
        }),
    )
}

/// Header of every trace file, by name. Used to check the data dictionary.
pub fn trace_headers() -> Vec<(&'static str, Vec<String>)> {
    TRACE_FILES.iter().map(|f| (f.name, (f.header)())).collect()
}
