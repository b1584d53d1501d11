//! Monte Carlo comparison of the robust filter against the nominal one under
//! transition-matrix mismatch.
//!
//! Every run samples one trajectory from the *true* transition schedule and
//! filters it under the *nominal* schedule once per radius in the grid, so
//! radii are compared on identical data. Run `i` draws from RNG stream `i`
//! of the base seed; runs execute in parallel and are reduced in run order.

use std::path::Path;

use drgpb_core::model::seeded_rng;
use drgpb_core::{
    run_filter, sample_trajectory, FilterConfig, InitialModeConvention, ModelSchedule,
    RadiusSchedule, Trajectory,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::formats::{self, fmt_f64, TraceRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub name: String,
    /// First step, inclusive.
    pub start: usize,
    /// Last step, inclusive.
    pub end: usize,
}

impl Window {
    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub true_schedule: ModelSchedule,
    pub nominal_schedule: ModelSchedule,
    pub horizon: usize,
    pub radii: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub windows: Vec<Window>,
    /// Filter settings; the radius is replaced by each grid value.
    pub filter: FilterConfig,
    pub initial_mode: InitialModeConvention,
    pub bootstrap_resamples: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.radii.is_empty() {
            return bad("radius grid is empty".into());
        }
        if let Some(r) = self.radii.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad(format!("radius {r} outside [0, 1]"));
        }
        for w in &self.windows {
            if w.start == 0 || w.start > w.end || w.end > self.horizon {
                return bad(format!("window {} = [{}, {}] outside 1..={}", w.name, w.start, w.end, self.horizon));
            }
        }
        if self.true_schedule.base().n_theta() != self.nominal_schedule.base().n_theta() {
            return bad("true and nominal models have different mode counts".into());
        }
        Ok(())
    }
}

/// Per-step errors of one filter run against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub run: usize,
    pub radius: f64,
    /// `‖x_k − x̂_k‖²` for `k = 1..N`.
    pub sq_errors: Vec<f64>,
    /// `argmax ν*_k == θ_k`.
    pub nu_hits: Vec<bool>,
    /// `argmax μ_k == θ_k`.
    pub mu_hits: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub steps: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mode_rate_nu: f64,
    pub mode_rate_mu: f64,
}

impl RunMetrics {
    pub fn window(&self, w: &Window) -> WindowMetrics {
        let idx = (w.start - 1)..w.end;
        let steps = idx.len();
        let n = steps as f64;
        let mse = self.sq_errors[idx.clone()].iter().sum::<f64>() / n;
        let rate = |hits: &[bool]| hits[idx.clone()].iter().filter(|h| **h).count() as f64 / n;
        WindowMetrics {
            steps,
            mse,
            rmse: mse.sqrt(),
            mode_rate_nu: rate(&self.nu_hits),
            mode_rate_mu: rate(&self.mu_hits),
        }
    }

    /// RMSE over steps `1..=k`, for every `k`.
    pub fn cumulative_rmse(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.sq_errors
            .iter()
            .enumerate()
            .map(|(i, e)| {
                acc += e;
                (acc / (i + 1) as f64).sqrt()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub trajectory: Trajectory,
    /// One entry per radius, in grid order.
    pub metrics: Vec<RunMetrics>,
    /// Full traces per radius; empty unless traces were requested.
    pub traces: Vec<Vec<TraceRecord>>,
}

#[derive(Debug, Clone)]
pub struct BatchResults {
    pub radii: Vec<f64>,
    pub windows: Vec<Window>,
    pub horizon: usize,
    pub seed: u64,
    pub runs: Vec<RunOutcome>,
}

fn run_one(spec: &ExperimentSpec, run: usize, keep_traces: bool) -> drgpb_core::Result<RunOutcome> {
    let mut rng = seeded_rng(spec.seed, run as u64);
    let traj = sample_trajectory(&spec.true_schedule, spec.horizon, spec.initial_mode, &mut rng)?;
    let mut metrics = Vec::with_capacity(spec.radii.len());
    let mut traces = Vec::new();
    for &radius in &spec.radii {
        let cfg = FilterConfig { radius: RadiusSchedule::Constant(radius), ..spec.filter.clone() };
        let states = run_filter(&spec.nominal_schedule, &traj.observations, &cfg)?;
        let mut m = RunMetrics {
            run,
            radius,
            sq_errors: Vec::with_capacity(states.len()),
            nu_hits: Vec::with_capacity(states.len()),
            mu_hits: Vec::with_capacity(states.len()),
        };
        for s in &states {
            let truth_mode = traj.modes[s.step - 1];
            m.sq_errors.push((&traj.states[s.step] - &s.merged.mean).norm_squared());
            m.nu_hits.push(s.nu_star.argmax() == truth_mode);
            m.mu_hits.push(s.mu.argmax() == truth_mode);
        }
        if keep_traces {
            traces.push(formats::trace_records(&states, Some(&traj)));
        }
        metrics.push(m);
    }
    Ok(RunOutcome { run, trajectory: traj, metrics, traces })
}

/// Runs every Monte Carlo replication. Output order is by run index
/// regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, keep_traces: bool) -> Result<BatchResults> {
    spec.validate()?;
    let runs = (0..spec.runs)
        .into_par_iter()
        .map(|i| run_one(spec, i, keep_traces).map_err(|source| Error::Run { run: i, source }))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchResults {
        radii: spec.radii.clone(),
        windows: spec.windows.clone(),
        horizon: spec.horizon,
        seed: spec.seed,
        runs,
    })
}

/// Paired comparison of one radius against radius zero on one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    /// Mean over runs of `RMSE(R) − RMSE(0)`; negative favours `R`.
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Runs where `R` had strictly lower RMSE.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub window: String,
    pub start: usize,
    pub end: usize,
    pub mean_rmse: f64,
    pub median_rmse: f64,
    pub mean_mode_rate_nu: f64,
    pub mean_mode_rate_mu: f64,
    pub vs_zero: PairedComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusSummary {
    pub rtv: f64,
    pub windows: Vec<WindowSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub rows: Vec<RadiusSummary>,
}

impl Summary {
    pub fn row(&self, rtv: f64) -> Option<&RadiusSummary> {
        self.rows.iter().find(|r| r.rtv == rtv)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Percentile bootstrap interval for the mean of `diffs`.
pub fn bootstrap_mean_ci<R: Rng>(diffs: &[f64], resamples: usize, confidence: f64, rng: &mut R) -> (f64, f64) {
    let n = diffs.len();
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let pick = |q: f64| {
        let idx = ((q * resamples as f64).floor() as usize).min(resamples - 1);
        means[idx]
    };
    (pick(tail), pick(1.0 - tail))
}

/// Per-radius, per-window summary with paired bootstrap comparisons against
/// radius zero.
pub fn compare_radii(batch: &BatchResults, resamples: usize) -> Result<Summary> {
    if batch.radii.len() < 2 {
        return Err(Error::Config("need at least two radii to compare".into()));
    }
    let Some(zero) = batch.radii.iter().position(|r| *r == 0.0) else {
        return Err(Error::Config("radius grid must include 0".into()));
    };
    const CONFIDENCE: f64 = 0.95;
    let mut rows = Vec::with_capacity(batch.radii.len());
    for (ri, &rtv) in batch.radii.iter().enumerate() {
        let mut windows = Vec::with_capacity(batch.windows.len());
        for (wi, w) in batch.windows.iter().enumerate() {
            let here: Vec<WindowMetrics> = batch.runs.iter().map(|r| r.metrics[ri].window(w)).collect();
            let base: Vec<WindowMetrics> = batch.runs.iter().map(|r| r.metrics[zero].window(w)).collect();
            let rmse: Vec<f64> = here.iter().map(|m| m.rmse).collect();
            let diffs: Vec<f64> = here.iter().zip(&base).map(|(a, b)| a.rmse - b.rmse).collect();
            // Streams above 2^32 never collide with run streams.
            let stream = (1u64 << 32) + (ri as u64) * 1024 + wi as u64;
            let (ci_low, ci_high) = bootstrap_mean_ci(&diffs, resamples, CONFIDENCE, &mut seeded_rng(batch.seed, stream));
            windows.push(WindowSummary {
                window: w.name.clone(),
                start: w.start,
                end: w.end,
                mean_rmse: mean(&rmse),
                median_rmse: median(&rmse),
                mean_mode_rate_nu: mean(&here.iter().map(|m| m.mode_rate_nu).collect::<Vec<_>>()),
                mean_mode_rate_mu: mean(&here.iter().map(|m| m.mode_rate_mu).collect::<Vec<_>>()),
                vs_zero: PairedComparison {
                    mean_diff: mean(&diffs),
                    ci_low,
                    ci_high,
                    wins: diffs.iter().filter(|d| **d < 0.0).count(),
                    losses: diffs.iter().filter(|d| **d > 0.0).count(),
                    ties: diffs.iter().filter(|d| **d == 0.0).count(),
                },
            });
        }
        rows.push(RadiusSummary { rtv, windows });
    }
    Ok(Summary {
        runs: batch.runs.len(),
        horizon: batch.horizon,
        seed: batch.seed,
        bootstrap_resamples: resamples,
        confidence: CONFIDENCE,
        rows,
    })
}

pub const METRICS_HEADER: &str = "run,rtv,window,start,end,steps,rmse,mse,mode_rate_nu,mode_rate_mu";

/// `metrics.csv` contents: one row per run × radius × window.
pub fn metrics_csv(batch: &BatchResults) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &batch.runs {
        for m in &r.metrics {
            for w in &batch.windows {
                let wm = m.window(w);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.run,
                    fmt_f64(m.radius),
                    w.name,
                    w.start,
                    w.end,
                    wm.steps,
                    fmt_f64(wm.rmse),
                    fmt_f64(wm.mse),
                    fmt_f64(wm.mode_rate_nu),
                    fmt_f64(wm.mode_rate_mu)
                ));
            }
        }
    }
    out
}

/// Writes `metrics.csv`, `summary.json` and, when traces were kept,
/// `traces/run_<i>_rtv_<r>.jsonl` under `dir`.
pub fn write_outputs(batch: &BatchResults, summary: &Summary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = dir.join("metrics.csv");
    std::fs::write(&metrics, metrics_csv(batch)).map_err(|e| Error::io(&metrics, e))?;
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(&summary_path, text + "\n").map_err(|e| Error::io(&summary_path, e))?;
    if batch.runs.iter().any(|r| !r.traces.is_empty()) {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
        for r in &batch.runs {
            for (rtv, records) in batch.radii.iter().zip(&r.traces) {
                let path = tdir.join(format!("run_{}_rtv_{}.jsonl", r.run, rtv));
                formats::write_trace_jsonl(&path, records)?;
            }
        }
    }
    Ok(())
}
