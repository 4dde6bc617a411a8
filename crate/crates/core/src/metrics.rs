//! Trace metrics and gain sweeps.

use rayon::prelude::*;

use crate::controller::Gains;
use crate::scenario::ScenarioConfig;
use crate::sim::{run_scenario, SimError, TraceRow};

/// Default convergence band on `max(|e1|, |e2|, |e3|)`.
pub const CONVERGENCE_EPS: f64 = 0.01;
/// Default time the errors must remain inside the band (s).
pub const CONVERGENCE_HOLD: f64 = 1.0;
/// Below this `|w|` the velocity ratio is undefined.
pub const RATIO_W_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence {
    At(f64),
    NotConverged,
}

impl Convergence {
    pub fn time(self) -> Option<f64> {
        match self {
            Convergence::At(t) => Some(t),
            Convergence::NotConverged => None,
        }
    }
}

/// Earliest sample time after which every error component stays below
/// `eps` until the end of the trace, provided that tail spans at least `hold`
/// seconds.
pub fn convergence_time(rows: &[TraceRow], eps: f64, hold: f64) -> Convergence {
    let Some(last) = rows.last() else {
        return Convergence::NotConverged;
    };
    let start = match rows.iter().rposition(|r| !(r.e.max_abs() < eps)) {
        None => 0,
        Some(i) if i + 1 < rows.len() => i + 1,
        Some(_) => return Convergence::NotConverged,
    };
    let t = rows[start].t;
    if last.t - t + 1e-9 < hold {
        return Convergence::NotConverged;
    }
    Convergence::At(t)
}

/// `(t, v / w)` per row; `None` where `|w|` is below [`RATIO_W_EPS`].
pub fn ratio_series(rows: &[TraceRow]) -> Vec<(f64, Option<f64>)> {
    rows.iter()
        .map(|r| {
            let ratio = (r.cmd.w.abs() >= RATIO_W_EPS).then(|| r.cmd.v / r.cmd.w);
            (r.t, ratio)
        })
        .collect()
}

/// Mean absolute per-step change of the angular velocity command.
pub fn chattering_index(rows: &[TraceRow]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let total: f64 = rows
        .windows(2)
        .map(|w| (w[1].cmd.w - w[0].cmd.w).abs())
        .sum();
    total / (rows.len() - 1) as f64
}

/// Largest `|s_i|` over the trace.
pub fn max_abs_surface(rows: &[TraceRow]) -> f64 {
    rows.iter().map(|r| r.s.max_abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMetrics {
    pub convergence: Convergence,
    pub max_abs_s: f64,
    pub chattering_index: f64,
}

impl SweepMetrics {
    pub fn from_rows(rows: &[TraceRow]) -> Self {
        Self {
            convergence: convergence_time(rows, CONVERGENCE_EPS, CONVERGENCE_HOLD),
            max_abs_s: max_abs_surface(rows),
            chattering_index: chattering_index(rows),
        }
    }
}

#[derive(Debug)]
pub struct SweepCell {
    pub gains: Gains,
    pub outcome: Result<SweepMetrics, SimError>,
}

/// Runs `base` once per grid point. Cells run in parallel; the result keeps
/// grid order and a failing cell does not stop the others.
pub fn sweep(base: &ScenarioConfig, grid: &[Gains]) -> Vec<SweepCell> {
    grid.par_iter()
        .map(|&gains| {
            let cfg = ScenarioConfig {
                gains,
                ..base.clone()
            };
            SweepCell {
                gains,
                outcome: run_scenario(&cfg).map(|tr| SweepMetrics::from_rows(&tr.rows)),
            }
        })
        .collect()
}
