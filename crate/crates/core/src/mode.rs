//! Nominal posterior mode probabilities.

use alloc::vec::Vec;

use crate::model::PROB_SUM_TOL;
use crate::{Error, Matrix, Result, Vector};

/// A probability vector over modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDistribution(Vector);

impl ModeDistribution {
    /// Checks nonnegativity and unit sum within `1e-12`.
    pub fn new(probs: Vector) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("mode distribution"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution(alloc::format!("entry {p} is not a probability")));
        }
        let sum = probs.sum();
        if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
            return Err(Error::InvalidDistribution(alloc::format!("sum is {sum}")));
        }
        Ok(ModeDistribution(probs))
    }

    pub fn from_slice(probs: &[f64]) -> Result<Self> {
        Self::new(Vector::from_row_slice(probs))
    }

    pub fn uniform(n: usize) -> Self {
        ModeDistribution(Vector::from_element(n, 1.0 / n as f64))
    }

    /// Point mass on `mode`.
    pub fn point(n: usize, mode: usize) -> Self {
        let mut v = Vector::zeros(n);
        v[mode] = 1.0;
        ModeDistribution(v)
    }

    /// Wraps a vector that the caller has already normalized.
    pub(crate) fn from_normalized(probs: Vector) -> Self {
        ModeDistribution(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &Vector {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }

    /// Total mass on a set of modes.
    pub fn mass(&self, modes: &[usize]) -> f64 {
        modes.iter().map(|&i| self.0[i]).sum()
    }

    /// Index of the most probable mode; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Satisfies the distribution invariants within `tol` on the sum.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.0.iter().all(|p| *p >= 0.0 && p.is_finite()) && (self.0.sum() - 1.0).abs() <= tol
    }
}

fn check_transition(mu: &ModeDistribution, pi: &Matrix) -> Result<()> {
    let n = mu.len();
    if pi.shape() != (n, n) {
        return Err(Error::Dimension(alloc::format!(
            "transition matrix is {}x{} for {n} modes",
            pi.nrows(),
            pi.ncols()
        )));
    }
    Ok(())
}

/// `p(θ_k = j | y_{1:k-1}) = Σ_i Π[i][j] μ_{k-1}(i)`.
pub fn predict_mode_prior(mu_prev: &ModeDistribution, pi: &Matrix) -> Result<ModeDistribution> {
    check_transition(mu_prev, pi)?;
    let pred = pi.tr_mul(mu_prev.probs());
    // Row-stochastic Π preserves the sum up to roundoff; renormalize to keep it exact.
    let sum = pred.sum();
    Ok(ModeDistribution(pred / sum))
}

/// Bayes update of the mode posterior with per-mode log-likelihoods,
/// normalized with log-sum-exp.
pub fn update_mode_posterior(
    mu_prev: &ModeDistribution,
    pi: &Matrix,
    log_likelihoods: &[f64],
) -> Result<ModeDistribution> {
    check_transition(mu_prev, pi)?;
    let n = mu_prev.len();
    if log_likelihoods.len() != n {
        return Err(Error::Dimension(alloc::format!(
            "{} log-likelihoods for {n} modes",
            log_likelihoods.len()
        )));
    }
    let prior = pi.tr_mul(mu_prev.probs());
    let log_joint: Vec<f64> = prior
        .iter()
        .zip(log_likelihoods)
        .map(|(&p, &ll)| if p > 0.0 { libm::log(p) + ll } else { f64::NEG_INFINITY })
        .collect();
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateEvidence);
    }
    let weights: Vec<f64> = log_joint.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = weights.iter().sum();
    Ok(ModeDistribution(Vector::from_iterator(n, weights.into_iter().map(|w| w / total))))
}
