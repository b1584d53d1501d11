//! Generic LP solution of the worst-case posterior problem, used to check the
//! closed-form water-filling rule.
//!
//! The ball is written with auxiliary variables `t_i ≥ |ν_i − μ_i|`:
//!
//! ```text
//! max  Σ L_i ν_i
//! s.t. Σ ν_i = 1,  ν ≥ 0,
//!      t_i ≥ ν_i − μ_i,  t_i ≥ μ_i − ν_i,  Σ t_i ≤ 2R
//! ```

use drgpb_core::robust::DEFAULT_TIE_TOL;
use drgpb_core::{
    model::seeded_rng, partition_levels, tvd_distance, waterfill, ModeDistribution, ValueCase,
    Vector,
};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Largest mode count the oracle accepts.
pub const MAX_ORACLE_MODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub value: f64,
    pub maximizer: Vec<f64>,
}

pub fn brute_force_oracle(mu: &[f64], losses: &[f64], r_tv: f64) -> Result<OracleSolution> {
    let n = mu.len();
    if n == 0 || n != losses.len() {
        return Err(Error::Config(format!("oracle needs matching nonempty inputs, got {n} and {}", losses.len())));
    }
    if n > MAX_ORACLE_MODES {
        return Err(Error::Config(format!("oracle limited to {MAX_ORACLE_MODES} modes, got {n}")));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let nu: Vec<_> = losses.iter().map(|&l| lp.add_var(l, (0.0, 1.0))).collect();
    let t: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(nu.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for i in 0..n {
        lp.add_constraint([(t[i], 1.0), (nu[i], -1.0)], ComparisonOp::Ge, -mu[i]);
        lp.add_constraint([(t[i], 1.0), (nu[i], 1.0)], ComparisonOp::Ge, mu[i]);
    }
    lp.add_constraint(t.iter().map(|&v| (v, 1.0)), ComparisonOp::Le, 2.0 * r_tv);
    let sol = lp
        .solve()
        .map_err(|e| Error::Config(format!("oracle LP failed: {e}")))?;
    let maximizer: Vec<f64> = nu.iter().map(|&v| sol[v]).collect();
    let value = maximizer.iter().zip(losses).map(|(a, b)| a * b).sum();
    Ok(OracleSolution { value, maximizer })
}

/// Worst deviations seen over a batch of random instances.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CrosscheckReport {
    pub instances: usize,
    /// `max |waterfill value − LP value|`.
    pub max_oracle_gap: f64,
    /// `max |waterfill value − equivalent-form value|`.
    pub max_equivalent_gap: f64,
    /// `max (TVD(ν*, μ) − R)⁺`.
    pub max_radius_excess: f64,
    /// `max |Σ ν* − 1|` together with negativity.
    pub max_simplex_error: f64,
    pub case1_count: usize,
    pub case2_count: usize,
}

impl CrosscheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_oracle_gap <= tol
            && self.max_equivalent_gap <= tol
            && self.max_radius_excess <= 1e-12
            && self.max_simplex_error <= 1e-12
    }
}

/// A random instance `(μ, L, R)` with `min_modes..=max_modes` modes. Some
/// instances carry exact loss ties or zero nominal mass.
pub fn random_instance<R: Rng>(rng: &mut R, min_modes: usize, max_modes: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rng.gen_range(min_modes..=max_modes);
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    if rng.gen_bool(0.2) {
        let i = rng.gen_range(0..n);
        w[i] = 0.0;
    }
    let s: f64 = w.iter().sum();
    let mu: Vec<f64> = if s > 0.0 { w.iter().map(|x| x / s).collect() } else { vec![1.0 / n as f64; n] };
    let losses: Vec<f64> = if rng.gen_bool(0.2) {
        (0..n).map(|_| rng.gen_range(0..4) as f64).collect()
    } else {
        (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()
    };
    let r = rng.gen_range(0.0..=1.0);
    (mu, losses, r)
}

/// Compares water-filling against the LP oracle and the equivalent closed
/// form on `instances` random problems with 2 to `max_modes` modes.
pub fn crosscheck(instances: usize, seed: u64, max_modes: usize) -> Result<CrosscheckReport> {
    if !(2..=MAX_ORACLE_MODES).contains(&max_modes) {
        return Err(Error::Config(format!("max modes must be in 2..={MAX_ORACLE_MODES}")));
    }
    let mut rng = seeded_rng(seed, 0);
    let mut report = CrosscheckReport { instances, ..Default::default() };
    for _ in 0..instances {
        let (mu, losses, r) = random_instance(&mut rng, 2, max_modes);
        let dist = ModeDistribution::new(Vector::from_vec(mu.clone()))?;
        let part = partition_levels(&losses, DEFAULT_TIE_TOL)?;
        let wf = waterfill(&dist, &part, r)?;
        let oracle = brute_force_oracle(&mu, &losses, r)?;

        report.max_oracle_gap = report.max_oracle_gap.max((wf.value - oracle.value).abs());
        report.max_equivalent_gap = report.max_equivalent_gap.max((wf.value - wf.value_equiv).abs());
        let excess = tvd_distance(&wf.nu_star, &dist)? - r;
        report.max_radius_excess = report.max_radius_excess.max(excess.max(0.0));
        let nu = wf.nu_star.as_slice();
        let simplex_err = (nu.iter().sum::<f64>() - 1.0)
            .abs()
            .max(nu.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
        report.max_simplex_error = report.max_simplex_error.max(simplex_err);
        match wf.case {
            ValueCase::Case1 => report.case1_count += 1,
            ValueCase::Case2 { .. } => report.case2_count += 1,
        }
    }
    Ok(report)
}
