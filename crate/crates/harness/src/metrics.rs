//! Run metrics and the STO / woSTO comparison.

use serde::{Deserialize, Serialize};

use quadservo_sim::Fidelity;

use crate::config::{ObserverMode, RunConfig};
use crate::error::HarnessError;
use crate::runner::TraceRow;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MpcDiagnostics {
    pub solves: usize,
    pub stale: usize,
    pub max_iterations: usize,
    pub max_kkt_residual: f64,
    pub max_constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub observer_mode: ObserverMode,
    pub fidelity: Fidelity,
    pub seed: u64,
    /// Last logged time, s.
    pub end_time: f64,
    pub tracking_lost_at: Option<f64>,
    /// Start of the first window where the tracking error stays below the threshold for the hold time.
    pub convergence_time: Option<f64>,
    /// Time after which the velocity estimate stays within tolerance until the end.
    pub observer_convergence_time: Option<f64>,
    /// Max velocity estimate error over the steady window.
    pub observer_steady_error: Option<f64>,
    pub tracking_rms: f64,
    pub tracking_max: f64,
    pub tracking_final: f64,
    /// Max and RMS tracking error over the steady window; `None` if the run ended before it.
    pub steady_tracking_max: Option<f64>,
    pub steady_tracking_rms: Option<f64>,
    pub visual_error_max: f64,
    pub visual_error_final: f64,
    pub mpc: MpcDiagnostics,
    /// Tracking was never lost and the convergence criterion was met.
    pub success: bool,
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn max(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

/// First `t_i` such that `values[j] < threshold` for all `t_j ∈ [t_i, t_i + hold]`,
/// with the whole window inside the record.
pub fn sustained_below(times: &[f64], values: &[f64], threshold: f64, hold: f64) -> Option<f64> {
    let last = *times.last()?;
    let eps = 1e-9;
    let mut start: Option<usize> = None;
    for (i, (&t, &v)) in times.iter().zip(values).enumerate() {
        if v < threshold {
            let s = *start.get_or_insert(i);
            if t - times[s] >= hold - eps {
                return Some(times[s]);
            }
        } else {
            start = None;
        }
        if start.is_none() && last - t < hold - eps {
            break;
        }
    }
    None
}

/// First `t_i` from which `values` stays below `threshold` to the end of the record.
pub fn below_until_end(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let idx = values.iter().rposition(|v| !(*v < threshold));
    match idx {
        None => times.first().copied(),
        Some(i) => times.get(i + 1).copied(),
    }
}

pub fn compute_metrics(config: &RunConfig, trace: &[TraceRow], tracking_lost_at: Option<f64>) -> RunMetrics {
    let mc = &config.metrics;
    let times: Vec<f64> = trace.iter().map(TraceRow::time).collect();
    let tracking: Vec<f64> = trace.iter().map(TraceRow::tracking_error).collect();
    let observer: Vec<f64> = trace.iter().map(TraceRow::observer_error).collect();
    let steady: Vec<usize> = (0..trace.len()).filter(|&i| times[i] >= mc.steady_after).collect();
    let steady_of = |v: &[f64]| -> Vec<f64> { steady.iter().map(|&i| v[i]).collect() };
    let convergence_time = sustained_below(&times, &tracking, mc.convergence_threshold, mc.convergence_hold);

    let mut mpc = MpcDiagnostics::default();
    for r in trace.iter().filter(|r| r.log.mpc_solved) {
        mpc.solves += 1;
        mpc.stale += r.log.mpc_stale as usize;
        mpc.max_iterations = mpc.max_iterations.max(r.log.mpc_iterations);
        mpc.max_kkt_residual = mpc.max_kkt_residual.max(r.log.mpc_kkt);
        mpc.max_constraint_residual = mpc.max_constraint_residual.max(r.log.mpc_constraint);
    }

    let steady_tracking = steady_of(&tracking);
    let steady_observer = steady_of(&observer);
    RunMetrics {
        scenario: config.scenario.clone(),
        observer_mode: config.observer_mode,
        fidelity: config.plant.fidelity,
        seed: config.seed,
        end_time: times.last().copied().unwrap_or(0.0),
        tracking_lost_at,
        convergence_time,
        observer_convergence_time: below_until_end(&times, &observer, mc.observer_tolerance),
        observer_steady_error: (!steady_observer.is_empty()).then(|| max(steady_observer.iter().copied())),
        tracking_rms: rms(tracking.iter().copied()),
        tracking_max: max(tracking.iter().copied()),
        tracking_final: tracking.last().copied().unwrap_or(f64::NAN),
        steady_tracking_max: (!steady_tracking.is_empty()).then(|| max(steady_tracking.iter().copied())),
        steady_tracking_rms: (!steady_tracking.is_empty()).then(|| rms(steady_tracking.iter().copied())),
        visual_error_max: max(trace.iter().map(|r| r.log.e.norm())),
        visual_error_final: trace.last().map(|r| r.log.e.norm()).unwrap_or(f64::NAN),
        mpc,
        success: tracking_lost_at.is_none() && convergence_time.is_some(),
    }
}

/// One row of the ablation report: the same scenario run in two observer modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub mode_a: ObserverMode,
    pub mode_b: ObserverMode,
    pub rms_a: f64,
    pub rms_b: f64,
    pub max_a: f64,
    pub max_b: f64,
    /// Steady-window max error; a run that ended before the window counts as infinite.
    pub steady_max_a: f64,
    pub steady_max_b: f64,
    pub converged_a: bool,
    pub converged_b: bool,
    pub tracking_lost_a: Option<f64>,
    pub tracking_lost_b: Option<f64>,
    pub rms_difference: f64,
    pub max_difference: f64,
    /// `steady_max_b / steady_max_a`.
    pub steady_ratio: f64,
}

fn steady_or_inf(m: &RunMetrics) -> f64 {
    match (m.tracking_lost_at, m.steady_tracking_max) {
        (None, Some(x)) => x,
        _ => f64::INFINITY,
    }
}

pub fn compare_runs(a: &RunMetrics, b: &RunMetrics) -> Result<Comparison, HarnessError> {
    if a.scenario != b.scenario {
        return Err(HarnessError::Mismatch(format!("scenario `{}` vs `{}`", a.scenario, b.scenario)));
    }
    if a.fidelity != b.fidelity {
        return Err(HarnessError::Mismatch("fidelity tiers differ".into()));
    }
    let (sa, sb) = (steady_or_inf(a), steady_or_inf(b));
    let ratio = if sa == sb { 1.0 } else { sb / sa };
    Ok(Comparison {
        scenario: a.scenario.clone(),
        mode_a: a.observer_mode,
        mode_b: b.observer_mode,
        rms_a: a.tracking_rms,
        rms_b: b.tracking_rms,
        max_a: a.tracking_max,
        max_b: b.tracking_max,
        steady_max_a: sa,
        steady_max_b: sb,
        converged_a: a.convergence_time.is_some(),
        converged_b: b.convergence_time.is_some(),
        tracking_lost_a: a.tracking_lost_at,
        tracking_lost_b: b.tracking_lost_at,
        rms_difference: b.tracking_rms - a.tracking_rms,
        max_difference: b.tracking_max - a.tracking_max,
        steady_ratio: ratio,
    })
}
