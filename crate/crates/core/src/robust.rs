//! Worst-case mode posterior over a total-variation ball.
//!
//! Given nominal probabilities `μ`, per-mode losses `L` and a radius `R`, the
//! maximizer of `Σ ν L` over `{ν ∈ simplex : ½‖ν − μ‖₁ ≤ R}` moves a mass
//! `α = min(R, 1 − μ(Θ⁰))` onto the top-loss set `Θ⁰`, draining the
//! lowest-loss sets first. [`waterfill`] builds that maximizer;
//! [`robust_value_equivalent`] evaluates the optimal value through a separate
//! closed form (nominal value plus correction terms) so the two can be
//! cross-checked.

use alloc::vec::Vec;

use crate::mode::ModeDistribution;
use crate::model::PROB_SUM_TOL;
use crate::{Error, Result, Vector};

/// Default relative tolerance for treating two losses as equal.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// `½ Σ |p_i − q_i|`.
pub fn tvd_distance(p: &ModeDistribution, q: &ModeDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(alloc::format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let d: f64 = p.as_slice().iter().zip(q.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * d).min(1.0))
}

/// A group of modes sharing one loss level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub modes: Vec<usize>,
    pub loss: f64,
}

/// Modes grouped by loss.
///
/// `top` is `Θ⁰` (the maximum-loss group). `levels` holds the remaining
/// groups in ascending loss order: `levels[0]` is `Θ₀`, `levels[s]` is `Θ_s`.
/// When every loss is tied, `top` holds all modes and `levels` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPartition {
    pub top: Level,
    pub levels: Vec<Level>,
    pub losses: Vec<f64>,
}

impl LevelPartition {
    pub fn n_modes(&self) -> usize {
        self.losses.len()
    }

    pub fn l_max(&self) -> f64 {
        self.top.loss
    }

    pub fn l_min(&self) -> f64 {
        self.levels.first().map_or(self.top.loss, |l| l.loss)
    }

    /// Number of intermediate levels `r`.
    pub fn intermediate_count(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }
}

fn tied(anchor: f64, v: f64, tol: f64) -> bool {
    (v - anchor).abs() <= tol * anchor.abs().max(v.abs())
}

/// Groups modes whose losses agree within relative tolerance `tie_tol`.
///
/// Groups are grown from their smallest member, so a group never spans more
/// than `tie_tol` relative to its minimum. Lower groups carry their minimum
/// loss, the top group its maximum.
pub fn partition_levels(losses: &[f64], tie_tol: f64) -> Result<LevelPartition> {
    if losses.is_empty() {
        return Err(Error::Empty("loss vector"));
    }
    if let Some(l) = losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::InvalidDistribution(alloc::format!("loss {l} is not finite")));
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));

    let mut groups: Vec<Level> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if tied(g.loss, losses[i], tie_tol) => g.modes.push(i),
            _ => groups.push(Level { modes: alloc::vec![i], loss: losses[i] }),
        }
    }
    for g in &mut groups {
        g.modes.sort_unstable();
    }
    let mut top = groups.pop().expect("at least one group");
    top.loss = top.modes.iter().map(|&i| losses[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok(LevelPartition { top, levels: groups, losses: losses.to_vec() })
}

/// Which branch of the equivalent-value formula applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueCase {
    /// `α ≤ μ(Θ₀)`: only the lowest level is drained.
    Case1,
    /// Levels `Θ₀ … Θ_{z−1}` are emptied and `Θ_z` is partially drained.
    Case2 { z: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentValue {
    pub value: f64,
    pub case: ValueCase,
    pub beta: f64,
    /// Loss level of the partially drained set `Θ̃`.
    pub l_tilde: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult {
    pub nu_star: ModeDistribution,
    /// Mass moved onto the top set.
    pub alpha: f64,
    pub partition: LevelPartition,
    /// `Σ ν*_i L_i`.
    pub value: f64,
    /// The same optimum from [`robust_value_equivalent`].
    pub value_equiv: f64,
    pub case: ValueCase,
    pub beta: f64,
}

fn check_inputs(mu: &ModeDistribution, partition: &LevelPartition) -> Result<()> {
    if mu.len() != partition.n_modes() {
        return Err(Error::Dimension(alloc::format!(
            "{} probabilities for {} losses",
            mu.len(),
            partition.n_modes()
        )));
    }
    Ok(())
}

/// `Σ μ_i L_i`.
pub fn nominal_value(mu: &ModeDistribution, losses: &[f64]) -> f64 {
    mu.as_slice().iter().zip(losses).map(|(m, l)| m * l).sum()
}

/// `α = min(R, 1 − μ(Θ⁰))`, clamped at zero against roundoff.
pub fn transfer_mass(mu: &ModeDistribution, partition: &LevelPartition, r_tv: f64) -> f64 {
    r_tv.min(1.0 - mu.mass(&partition.top.modes)).max(0.0)
}

/// Worst-case posterior within TV radius `r_tv` of `mu`.
///
/// Set-level masses are
///
/// ```text
/// ν*(Θ⁰) = μ(Θ⁰) + α
/// ν*(Θ_s) = ( μ(Θ_s) − (α − Σ_{j<s} μ(Θ_j))⁺ )⁺     s = 0, 1, …, r
/// ```
///
/// and each set's mass is split over its members in proportion to `μ`
/// (equally if the set has no nominal mass).
pub fn waterfill(
    mu: &ModeDistribution,
    partition: &LevelPartition,
    r_tv: f64,
) -> Result<WaterfillResult> {
    if !(0.0..=1.0).contains(&r_tv) {
        return Err(Error::InvalidRadius(r_tv));
    }
    check_inputs(mu, partition)?;
    let n = mu.len();
    let p = mu.as_slice();
    let alpha = transfer_mass(mu, partition, r_tv);

    let mut nu = Vector::zeros(n);
    let mut assign = |modes: &[usize], set_mass: f64, target: f64| {
        if set_mass > 0.0 {
            for &i in modes {
                nu[i] = target * (p[i] / set_mass);
            }
        } else if target > 0.0 {
            let share = target / modes.len() as f64;
            for &i in modes {
                nu[i] = share;
            }
        }
    };

    let top_mass = mu.mass(&partition.top.modes);
    assign(&partition.top.modes, top_mass, top_mass + alpha);
    let mut drained_before = 0.0;
    for level in &partition.levels {
        let set_mass = mu.mass(&level.modes);
        let still_to_drain = (alpha - drained_before).max(0.0);
        let target = (set_mass - still_to_drain).max(0.0);
        assign(&level.modes, set_mass, target);
        drained_before += set_mass;
    }

    let sum = nu.sum();
    if !((sum - 1.0).abs() <= 1e-10) {
        return Err(Error::Internal(alloc::format!("water-filling mass sums to {sum}")));
    }
    let nu_star = ModeDistribution::from_normalized(nu);
    let value = nominal_value(&nu_star, &partition.losses);
    let eq = robust_value_equivalent(mu, partition, alpha)?;

    Ok(WaterfillResult {
        nu_star,
        alpha,
        partition: partition.clone(),
        value,
        value_equiv: eq.value,
        case: eq.case,
        beta: eq.beta,
    })
}

/// Optimal worst-case value written as the nominal value plus correction
/// terms:
///
/// ```text
/// V = Σ μ L + β(α) + α (L_max − L_Θ̃)
/// ```
///
/// Case 1 (`α ≤ μ(Θ₀)`): `Θ̃ = Θ₀`, `β = 0`. Case 2: the smallest `z` with
/// `μ(Θ₀ ∪ … ∪ Θ_z) ≥ α` gives `Θ̃ = Θ_z` and
/// `β = Σ_{s<z} (L_Θz − L_Θs) μ(Θ_s)`. Ties at a boundary resolve to the lower case.
pub fn robust_value_equivalent(
    mu: &ModeDistribution,
    partition: &LevelPartition,
    alpha: f64,
) -> Result<EquivalentValue> {
    check_inputs(mu, partition)?;
    let nominal = nominal_value(mu, &partition.losses);
    let l_max = partition.l_max();

    let Some(first) = partition.levels.first() else {
        return Ok(EquivalentValue { value: nominal, case: ValueCase::Case1, beta: 0.0, l_tilde: l_max });
    };

    let masses: Vec<f64> = partition.levels.iter().map(|l| mu.mass(&l.modes)).collect();
    if alpha <= masses[0] {
        return Ok(EquivalentValue {
            value: nominal + alpha * (l_max - first.loss),
            case: ValueCase::Case1,
            beta: 0.0,
            l_tilde: first.loss,
        });
    }

    let last = partition.levels.len() - 1;
    let mut cumulative = masses[0];
    let mut chosen = None;
    for z in 1..=last {
        cumulative += masses[z];
        if alpha <= cumulative {
            chosen = Some(z);
            break;
        }
    }
    // α = 1 − μ(Θ⁰) can exceed the running sum by roundoff.
    let z = match chosen {
        Some(z) => z,
        None if alpha <= cumulative + PROB_SUM_TOL => last,
        None => {
            return Err(Error::Internal(alloc::format!(
                "alpha {alpha} exceeds the drainable mass {cumulative}"
            )))
        }
    };
    if z == 0 {
        return Ok(EquivalentValue {
            value: nominal + alpha * (l_max - first.loss),
            case: ValueCase::Case1,
            beta: 0.0,
            l_tilde: first.loss,
        });
    }
    let l_z = partition.levels[z].loss;
    let beta: f64 = (0..z).map(|s| (l_z - partition.levels[s].loss) * masses[s]).sum();
    Ok(EquivalentValue {
        value: nominal + beta + alpha * (l_max - l_z),
        case: ValueCase::Case2 { z },
        beta,
        l_tilde: l_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> ModeDistribution {
        ModeDistribution::from_slice(p).unwrap()
    }

    /// Exhaustive vertex enumeration of `{ν : Σν = 1, ν ≥ 0, Σ s_i(ν_i − μ_i) ≤ 2R ∀ s ∈ {±1}ⁿ}`.
    /// Every vertex makes `n − 1` inequalities active next to the equality.
    fn vertex_oracle(mu: &[f64], losses: &[f64], r: f64) -> f64 {
        let n = mu.len();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..n {
            let mut a = vec![0.0; n];
            a[i] = -1.0;
            rows.push((a, 0.0));
        }
        for mask in 0..(1u32 << n) {
            let s: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let rhs = 2.0 * r + s.iter().zip(mu).map(|(a, b)| a * b).sum::<f64>();
            rows.push((s, rhs));
        }
        let feasible = |nu: &crate::Vector| {
            nu.iter().all(|v| *v >= -1e-11)
                && rows.iter().all(|(a, b)| a.iter().zip(nu.iter()).map(|(x, y)| x * y).sum::<f64>() <= b + 1e-11)
        };
        let mut best = f64::NEG_INFINITY;
        let mut pick = vec![0usize; n - 1];
        fn rec(
            start: usize,
            depth: usize,
            pick: &mut Vec<usize>,
            rows: usize,
            visit: &mut dyn FnMut(&[usize]),
        ) {
            if depth == pick.len() {
                visit(pick);
                return;
            }
            for i in start..rows {
                pick[depth] = i;
                rec(i + 1, depth + 1, pick, rows, visit);
            }
        }
        let mut visit = |chosen: &[usize]| {
            let mut m = crate::Matrix::zeros(n, n);
            let mut b = crate::Vector::zeros(n);
            for c in 0..n {
                m[(0, c)] = 1.0;
            }
            b[0] = 1.0;
            for (r_i, &ix) in chosen.iter().enumerate() {
                for c in 0..n {
                    m[(r_i + 1, c)] = rows[ix].0[c];
                }
                b[r_i + 1] = rows[ix].1;
            }
            if let Some(nu) = m.lu().solve(&b) {
                if nu.iter().all(|v| v.is_finite()) && feasible(&nu) {
                    let v: f64 = nu.iter().zip(losses).map(|(a, b)| a * b).sum();
                    best = best.max(v);
                }
            }
        };
        rec(0, 0, &mut pick, rows.len(), &mut visit);
        best
    }

    #[test]
    fn distance_examples() {
        let p = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(tvd_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tvd_distance(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 1.0);
        let d = tvd_distance(&p, &dist(&[0.5, 0.5, 0.0])).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert!(tvd_distance(&p, &dist(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn partition_examples() {
        let p = partition_levels(&[1.0, 3.0, 2.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(p.top.modes, vec![1]);
        assert_eq!(p.levels.len(), 2);
        assert_eq!(p.levels[0].modes, vec![0]);
        assert_eq!(p.levels[1].modes, vec![2]);
        assert_eq!((p.l_max(), p.l_min()), (3.0, 1.0));

        let p = partition_levels(&[5.0, 5.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(p.top.modes, vec![0, 1]);
        assert!(p.levels.is_empty());

        let p = partition_levels(&[1.0, 1.0, 9.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(p.top.modes, vec![2]);
        assert_eq!(p.levels, vec![Level { modes: vec![0, 1], loss: 1.0 }]);
        assert_eq!(p.intermediate_count(), 0);

        assert!(partition_levels(&[], DEFAULT_TIE_TOL).is_err());
        assert!(partition_levels(&[1.0, f64::NAN], DEFAULT_TIE_TOL).is_err());
    }

    #[test]
    fn near_ties_group_within_tolerance() {
        let p = partition_levels(&[2.0, 2.0 * (1.0 + 1e-12), 7.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(p.levels[0].modes, vec![0, 1]);
        let p = partition_levels(&[2.0, 2.0 * (1.0 + 1e-6), 7.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(p.levels.len(), 2);
    }

    #[test]
    fn zero_radius_is_identity() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        let part = partition_levels(&[1.0, 3.0, 2.0], DEFAULT_TIE_TOL).unwrap();
        let r = waterfill(&mu, &part, 0.0).unwrap();
        assert_eq!(r.nu_star, mu);
        assert_eq!(r.alpha, 0.0);
        assert!((r.value - 1.8).abs() < 1e-15);
        assert!((r.value_equiv - 1.8).abs() < 1e-15);
    }

    #[test]
    fn three_mode_examples() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        let losses = [1.0, 3.0, 2.0];
        let part = partition_levels(&losses, DEFAULT_TIE_TOL).unwrap();

        // Frozen from the vertex oracle below.
        assert!((vertex_oracle(mu.as_slice(), &losses, 0.2) - 2.2).abs() < 1e-12);
        assert!((vertex_oracle(mu.as_slice(), &losses, 0.6) - 2.9).abs() < 1e-12);
        assert!((vertex_oracle(mu.as_slice(), &losses, 1.0) - 3.0).abs() < 1e-12);

        let r = waterfill(&mu, &part, 0.2).unwrap();
        assert!((r.alpha - 0.2).abs() < 1e-15);
        for (a, b) in r.nu_star.as_slice().iter().zip([0.3, 0.5, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.value - 2.2).abs() < 1e-14);
        assert_eq!(r.case, ValueCase::Case1);
        assert_eq!(r.beta, 0.0);

        let r = waterfill(&mu, &part, 0.6).unwrap();
        for (a, b) in r.nu_star.as_slice().iter().zip([0.0, 0.9, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(r.case, ValueCase::Case2 { z: 1 });
        assert!((r.beta - 0.5).abs() < 1e-15);
        assert!((r.value - 2.9).abs() < 1e-14);
        assert!((r.value_equiv - 2.9).abs() < 1e-14);

        let r = waterfill(&mu, &part, 1.0).unwrap();
        assert!((r.alpha - 0.7).abs() < 1e-15);
        for (a, b) in r.nu_star.as_slice().iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn equivalent_value_direct() {
        let mu = dist(&[0.5, 0.3, 0.2]);
        let part = partition_levels(&[1.0, 3.0, 2.0], DEFAULT_TIE_TOL).unwrap();
        let e = robust_value_equivalent(&mu, &part, 0.2).unwrap();
        assert_eq!((e.case, e.beta, e.l_tilde), (ValueCase::Case1, 0.0, 1.0));
        assert!((e.value - 2.2).abs() < 1e-15);
        let e = robust_value_equivalent(&mu, &part, 0.0).unwrap();
        assert_eq!(e.value, 0.5 * 1.0 + 0.3 * 3.0 + 0.2 * 2.0);
        // α exactly at the Case 1 boundary stays in Case 1.
        let e = robust_value_equivalent(&mu, &part, 0.5).unwrap();
        assert_eq!(e.case, ValueCase::Case1);
    }

    #[test]
    fn two_mode_move() {
        let mu = dist(&[1.0, 0.0]);
        assert!((vertex_oracle(mu.as_slice(), &[1.0, 2.0], 0.3) - 1.3).abs() < 1e-12);
        let part = partition_levels(&[1.0, 2.0], DEFAULT_TIE_TOL).unwrap();
        let r = waterfill(&mu, &part, 0.3).unwrap();
        for (a, b) in r.nu_star.as_slice().iter().zip([0.7, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.value - 1.3).abs() < 1e-15);
    }

    #[test]
    fn empty_top_set_shares_equally() {
        let mu = dist(&[0.6, 0.4, 0.0, 0.0]);
        let part = partition_levels(&[1.0, 2.0, 5.0, 5.0], DEFAULT_TIE_TOL).unwrap();
        let r = waterfill(&mu, &part, 0.3).unwrap();
        assert_eq!(r.partition.top.modes, vec![2, 3]);
        let nu = r.nu_star.as_slice();
        assert!((nu[2] - 0.15).abs() < 1e-15 && (nu[3] - 0.15).abs() < 1e-15);
        assert!((nu[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constant_losses_keep_nominal() {
        let mu = dist(&[0.2, 0.8]);
        let part = partition_levels(&[5.0, 5.0], DEFAULT_TIE_TOL).unwrap();
        let r = waterfill(&mu, &part, 0.7).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.nu_star, mu);
        assert_eq!(r.value, 5.0);
    }

    #[test]
    fn rejects_bad_radius() {
        let mu = dist(&[0.5, 0.5]);
        let part = partition_levels(&[1.0, 2.0], DEFAULT_TIE_TOL).unwrap();
        assert_eq!(waterfill(&mu, &part, 1.5), Err(Error::InvalidRadius(1.5)));
        assert!(waterfill(&mu, &part, f64::NAN).is_err());
        assert!(waterfill(&mu, &part, -0.1).is_err());
    }

    fn instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (2..=max_n).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0.0f64..10.0, n),
                0.0f64..=1.0,
            )
                .prop_filter("nonzero mass", |(w, _, _)| w.iter().sum::<f64>() > 1e-3)
                .prop_map(|(w, l, r)| {
                    let s: f64 = w.iter().sum();
                    (w.iter().map(|x| x / s).collect(), l, r)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_vertex_oracle((mu, losses, r) in instance(4)) {
            let d = ModeDistribution::from_normalized(crate::Vector::from_row_slice(&mu));
            let part = partition_levels(&losses, DEFAULT_TIE_TOL).unwrap();
            let res = waterfill(&d, &part, r).unwrap();
            let oracle = vertex_oracle(&mu, &losses, r);
            prop_assert!((res.value - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
            prop_assert!((res.value - res.value_equiv).abs() <= 1e-9 * res.value.abs().max(1.0));
            prop_assert!(res.nu_star.is_valid(1e-12));
            prop_assert!(tvd_distance(&res.nu_star, &d).unwrap() <= r + 1e-12);
        }

        #[test]
        fn value_nondecreasing_in_radius((mu, losses, _r) in instance(6)) {
            let d = ModeDistribution::from_normalized(crate::Vector::from_row_slice(&mu));
            let part = partition_levels(&losses, DEFAULT_TIE_TOL).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=20 {
                let v = waterfill(&d, &part, i as f64 / 20.0).unwrap().value;
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }

        #[test]
        fn saturated_ball_concentrates_on_top((mu, losses, _r) in instance(6)) {
            let d = ModeDistribution::from_normalized(crate::Vector::from_row_slice(&mu));
            let part = partition_levels(&losses, DEFAULT_TIE_TOL).unwrap();
            let r = (1.0 - d.mass(&part.top.modes)).min(1.0);
            let res = waterfill(&d, &part, r).unwrap();
            prop_assert!((res.nu_star.mass(&part.top.modes) - 1.0).abs() <= 1e-12);
            prop_assert!((res.value - part.l_max()).abs() <= 1e-9 * part.l_max().max(1.0));
        }
    }
}
