//! Trajectory files and per-step trace export.
//!
//! Trace CSV columns, in order:
//!
//! ```text
//! k, x_hat_1..x_hat_n, p_diag_1..p_diag_n, mu_1..mu_m, nu_star_1..nu_star_m,
//! alpha, rtv, robust_value, true_mode, x_true_1..x_true_n
//! ```
//!
//! `true_mode` and `x_true_*` are empty when the ground truth is unknown.
//! Numbers are written with 17 significant digits. Modes are 1-based.

use std::io::Write;
use std::path::Path;

use drgpb_core::{FilterState, Trajectory, Vector};
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub schema: u32,
    pub horizon: usize,
    /// `θ_1..θ_N`, 1-based.
    pub modes: Vec<usize>,
    /// `x_0..x_N`.
    pub states: Vec<Vec<f64>>,
    /// `y_1..y_N`.
    pub observations: Vec<Vec<f64>>,
}

impl TrajectoryFile {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        TrajectoryFile {
            schema: SCHEMA_VERSION,
            horizon: t.horizon(),
            modes: t.modes.iter().map(|m| m + 1).collect(),
            states: t.states.iter().map(|x| x.iter().copied().collect()).collect(),
            observations: t.observations.iter().map(|y| y.iter().copied().collect()).collect(),
        }
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let n = self.horizon;
        if self.modes.len() != n || self.observations.len() != n || self.states.len() != n + 1 {
            return Err(Error::Config(format!(
                "trajectory lengths inconsistent with horizon {n}: {} modes, {} states, {} observations",
                self.modes.len(),
                self.states.len(),
                self.observations.len()
            )));
        }
        if self.modes.contains(&0) {
            return Err(Error::Config("trajectory modes are 1-based".into()));
        }
        Ok(Trajectory {
            modes: self.modes.iter().map(|m| m - 1).collect(),
            states: self.states.iter().map(|x| Vector::from_vec(x.clone())).collect(),
            observations: self.observations.iter().map(|y| Vector::from_vec(y.clone())).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("trajectory serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// One exported filter step.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub x_hat: Vec<f64>,
    pub p_diag: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu_star: Vec<f64>,
    pub alpha: f64,
    pub rtv: f64,
    pub robust_value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x_true: Option<Vec<f64>>,
}

impl TraceRecord {
    /// `truth` is `(θ_k, x_k)` with a 0-based mode.
    pub fn from_state(state: &FilterState, truth: Option<(usize, &Vector)>) -> Self {
        TraceRecord {
            k: state.step,
            x_hat: state.merged.mean.iter().copied().collect(),
            p_diag: state.merged.cov.diagonal().iter().copied().collect(),
            mu: state.mu.as_slice().to_vec(),
            nu_star: state.nu_star.as_slice().to_vec(),
            alpha: state.alpha,
            rtv: state.radius,
            robust_value: state.robust_value,
            true_mode: truth.map(|(m, _)| m + 1),
            x_true: truth.map(|(_, x)| x.iter().copied().collect()),
        }
    }
}

/// Builds trace records, attaching ground truth when a trajectory is given.
pub fn trace_records(states: &[FilterState], truth: Option<&Trajectory>) -> Vec<TraceRecord> {
    states
        .iter()
        .map(|s| {
            let t = truth.map(|t| (t.modes[s.step - 1], &t.states[s.step]));
            TraceRecord::from_state(s, t)
        })
        .collect()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(n_x: usize, n_theta: usize) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=n_x).map(|i| format!("x_hat_{i}")));
    cols.extend((1..=n_x).map(|i| format!("p_diag_{i}")));
    cols.extend((1..=n_theta).map(|i| format!("mu_{i}")));
    cols.extend((1..=n_theta).map(|i| format!("nu_star_{i}")));
    cols.extend(["alpha", "rtv", "robust_value", "true_mode"].map(String::from));
    cols.extend((1..=n_x).map(|i| format!("x_true_{i}")));
    cols.join(",")
}

pub fn csv_row(r: &TraceRecord) -> String {
    let mut cols = vec![r.k.to_string()];
    cols.extend(r.x_hat.iter().map(|v| fmt_f64(*v)));
    cols.extend(r.p_diag.iter().map(|v| fmt_f64(*v)));
    cols.extend(r.mu.iter().map(|v| fmt_f64(*v)));
    cols.extend(r.nu_star.iter().map(|v| fmt_f64(*v)));
    cols.extend([r.alpha, r.rtv, r.robust_value].map(fmt_f64));
    cols.push(r.true_mode.map(|m| m.to_string()).unwrap_or_default());
    match &r.x_true {
        Some(x) => cols.extend(x.iter().map(|v| fmt_f64(*v))),
        None => cols.extend(std::iter::repeat_n(String::new(), r.x_hat.len())),
    }
    cols.join(",")
}

pub fn write_trace_csv(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let (n_x, n_theta) = records.first().map_or((0, 0), |r| (r.x_hat.len(), r.mu.len()));
    let mut out = csv_header(n_x, n_theta);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_trace_jsonl(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("trace record serializes");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
