//! Distributionally robust first-order GPB filter.
//!
//! Each step:
//!
//! 1. every mode-matched Kalman filter is seeded from the merged estimate of
//!    the previous step and corrected with `y_k`; the nominal mode posterior
//!    `μ_k` is updated with the resulting innovation likelihoods;
//! 2. per-mode losses `L(j) = tr(P_k^j) / μ_k(j)` are grouped into levels and
//!    the worst-case posterior `ν*_k` is obtained by water-filling;
//! 3. the bank is merged with `ν*_k` (moment matching).
//!
//! With radius zero `ν*_k = μ_k` and this is the classical GPB1 filter.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::kalman::{kf_step, GaussianBelief, KalmanOptions, ModeStepOutput};
use crate::mode::{update_mode_posterior, ModeDistribution};
use crate::model::{MjlsModel, ModelSchedule, ModelView};
use crate::robust::{partition_levels, waterfill, ValueCase, DEFAULT_TIE_TOL};
use crate::{linalg, Error, Matrix, Result, Vector};

/// TV radius as a function of the (1-based) time step.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusSchedule {
    Constant(f64),
    /// `(start step, radius)` pairs sorted by start; the first should start at 1.
    Piecewise(Vec<(usize, f64)>),
    /// One radius per step; steps past the end reuse the last value.
    PerStep(Vec<f64>),
}

impl RadiusSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            RadiusSchedule::Constant(r) => *r,
            RadiusSchedule::Piecewise(segs) => {
                let idx = segs.partition_point(|(start, _)| *start <= k);
                segs[idx.saturating_sub(1)].1
            }
            RadiusSchedule::PerStep(v) => v[(k.max(1) - 1).min(v.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values: Vec<f64> = match self {
            RadiusSchedule::Constant(r) => alloc::vec![*r],
            RadiusSchedule::Piecewise(segs) => {
                if segs.is_empty() {
                    return Err(Error::InvalidSchedule("empty radius schedule".into()));
                }
                if segs.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidSchedule("radius segments must be strictly increasing".into()));
                }
                segs.iter().map(|s| s.1).collect()
            }
            RadiusSchedule::PerStep(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidSchedule("empty radius schedule".into()));
                }
                v.clone()
            }
        };
        match values.into_iter().find(|r| !(0.0..=1.0).contains(r)) {
            Some(bad) => Err(Error::InvalidRadius(bad)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub radius: RadiusSchedule,
    /// Floor on `μ(j)` when dividing in the loss `tr(P^j) / μ(j)`.
    pub mu_floor: f64,
    /// Relative tolerance for grouping equal losses.
    pub tie_tol: f64,
    pub kalman: KalmanOptions,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            radius: RadiusSchedule::Constant(0.0),
            mu_floor: 1e-12,
            tie_tol: DEFAULT_TIE_TOL,
            kalman: KalmanOptions::default(),
        }
    }
}

impl FilterConfig {
    pub fn with_radius(radius: f64) -> Self {
        FilterConfig { radius: RadiusSchedule::Constant(radius), ..Default::default() }
    }
}

/// Filter output after step `step` (0 is the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub step: usize,
    pub merged: GaussianBelief,
    /// Nominal posterior.
    pub mu: ModeDistribution,
    /// Worst-case posterior used for merging.
    pub nu_star: ModeDistribution,
    pub alpha: f64,
    pub radius: f64,
    /// Per-mode filter outputs; empty for the initial state.
    pub bank: Vec<ModeStepOutput>,
    pub losses: Vec<f64>,
    /// `Σ ν* L`.
    pub robust_value: f64,
    pub robust_value_equiv: f64,
    pub case: Option<ValueCase>,
}

/// Initial state: merged belief `(x̄₀, X₀)` and `μ_0 = ν*_0 = p0_mode`.
pub fn init_filter(model: &MjlsModel) -> Result<FilterState> {
    model.validate().into_result()?;
    let mu = ModeDistribution::new(model.p0_mode.clone())?;
    Ok(FilterState {
        step: 0,
        merged: GaussianBelief::new(model.x0_mean.clone(), model.x0_cov.clone()),
        nu_star: mu.clone(),
        mu,
        alpha: 0.0,
        radius: 0.0,
        bank: Vec::new(),
        losses: Vec::new(),
        robust_value: 0.0,
        robust_value_equiv: 0.0,
        case: None,
    })
}

/// `L(j) = tr(P^j) / max(μ(j), floor)`.
pub fn compute_mode_losses(mu: &ModeDistribution, covs: &[&Matrix], floor: f64) -> Result<Vec<f64>> {
    if covs.len() != mu.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} covariances for {} modes",
            covs.len(),
            mu.len()
        )));
    }
    Ok(covs
        .iter()
        .zip(mu.as_slice())
        .map(|(p, &m)| p.trace() / m.max(floor))
        .collect())
}

/// Moment-matched mixture of per-mode Gaussians with the given weights.
///
/// The mean is formed first because the spread terms depend on it.
pub fn merge_estimates(weights: &ModeDistribution, components: &[&GaussianBelief]) -> Result<GaussianBelief> {
    if components.len() != weights.len() || components.is_empty() {
        return Err(Error::Dimension(alloc::format!(
            "{} components for {} weights",
            components.len(),
            weights.len()
        )));
    }
    let n = components[0].dim();
    let mut mean = Vector::zeros(n);
    for (w, c) in weights.as_slice().iter().zip(components) {
        mean.axpy(*w, &c.mean, 1.0);
    }
    let mut cov = Matrix::zeros(n, n);
    for (w, c) in weights.as_slice().iter().zip(components) {
        let d = &mean - &c.mean;
        cov += (&c.cov + &d * d.transpose()) * *w;
    }
    Ok(GaussianBelief::new(mean, linalg::symmetrize(&cov)))
}

/// One DRGPB step with radius `r_tv`.
pub fn drgpb_step(
    state: &FilterState,
    view: ModelView<'_>,
    y: &Vector,
    r_tv: f64,
    config: &FilterConfig,
) -> Result<FilterState> {
    if !(0.0..=1.0).contains(&r_tv) {
        return Err(Error::InvalidRadius(r_tv));
    }
    let model = view.model;
    let step = state.step + 1;

    let bank = (0..model.n_theta())
        .map(|j| kf_step(model, j, &state.merged, y, &config.kalman, step))
        .collect::<Result<Vec<_>>>()?;

    let log_lik: Vec<f64> = bank.iter().map(|o| o.log_likelihood).collect();
    let mu = update_mode_posterior(&state.mu, view.pi, &log_lik)?;

    let covs: Vec<&Matrix> = bank.iter().map(|o| &o.posterior.cov).collect();
    let losses = compute_mode_losses(&mu, &covs, config.mu_floor)?;
    let partition = partition_levels(&losses, config.tie_tol)?;
    let wf = waterfill(&mu, &partition, r_tv)?;

    let posteriors: Vec<&GaussianBelief> = bank.iter().map(|o| &o.posterior).collect();
    let merged = merge_estimates(&wf.nu_star, &posteriors)?;

    Ok(FilterState {
        step,
        merged,
        mu,
        nu_star: wf.nu_star,
        alpha: wf.alpha,
        radius: r_tv,
        bank,
        losses,
        robust_value: wf.value,
        robust_value_equiv: wf.value_equiv,
        case: Some(wf.case),
    })
}

/// Runs the filter over `observations` (step `k` uses `observations[k-1]`
/// and the transition matrix scheduled for `k`). Returns the states for
/// steps `1..=N`.
pub fn run_filter(
    schedule: &ModelSchedule,
    observations: &[Vector],
    config: &FilterConfig,
) -> Result<Vec<FilterState>> {
    if observations.is_empty() {
        return Err(Error::Empty("observation sequence"));
    }
    config.radius.validate()?;
    let mut state = init_filter(schedule.base())?;
    let mut out = Vec::with_capacity(observations.len());
    for (i, y) in observations.iter().enumerate() {
        let k = i + 1;
        state = drgpb_step(&state, schedule.view(k), y, config.radius.at(k), config)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        out.push(state.clone());
    }
    Ok(out)
}
