//! Both sides of the variational representation
//! `log E[e^{F(W)}] = sup_v E[F(T^v(W)) − ½∫|v|²ds]`, plus truncation
//! sweeps, assumption validators, and the lower-bound / entropy identity
//! checks.
//!
//! On the discrete grid the reweighting identities behind these estimators
//! are exact (the Doléans weight has mean exactly one for adapted
//! feedbacks), so every comparison below is statistical only.

use crate::drift::SimpleDrift;
use crate::error::{Error, Result};
use crate::estimate::{self, combined_stderr, Estimate};
use crate::functional::Functional;
use crate::wiener::{
    at_path, ito_sums, sample_wiener, transform_with_values, DoleansWeight, TimeGrid,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Direct estimator of `log E[e^{F(W)}]`: log of the Monte Carlo mean of
/// `e^F`, standard error by the delta method. Rejected paths (`F = -∞`)
/// contribute zero mass.
pub fn estimate_lhs_direct(
    f: &Functional,
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    f.validate_grid(grid)?;
    let vals = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let y = f.eval(&w);
        if y.is_nan() {
            return Err(Error::eval(i, format!("functional {} returned NaN", f.name)));
        }
        let e = y.exp();
        if e.is_infinite() {
            return Err(Error::eval(i, format!("e^F overflowed (F = {y:.6e})")));
        }
        Ok(e)
    })?;
    let n_rejected = vals.iter().filter(|&&v| v == 0.0).count();
    if n_rejected == vals.len() {
        return Err(Error::estimation(format!(
            "all {n_paths} paths rejected by functional {}",
            f.name
        )));
    }
    Ok(Estimate::log_of_mean(&vals, seed))
}

/// Importance-sampled estimator of the same quantity:
/// log of the Monte Carlo mean of `E^v_1(W) · e^{F(T^{-v}(W))}`, unbiased
/// for `E[e^F]` for any bounded adapted `v` by the reweighting identity.
pub fn estimate_lhs_importance(
    f: &Functional,
    v: &SimpleDrift,
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    f.validate_grid(grid)?;
    v.check_grid(grid)?;
    let vals = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let dv = v.values_along(&w).map_err(|e| at_path(e, i))?;
        let (si, energy) = ito_sums(&w, &dv);
        let shifted = transform_with_values(&w, &dv, -1.0);
        let y = f.eval(&shifted);
        if y.is_nan() {
            return Err(Error::eval(i, format!("functional {} returned NaN", f.name)));
        }
        // one exp of (log weight + F) keeps the product stable
        let e = (si - 0.5 * energy + y).exp();
        if e.is_infinite() {
            return Err(Error::eval(i, "reweighted summand overflowed".to_string()));
        }
        Ok(e)
    })?;
    if vals.iter().all(|&v| v == 0.0) {
        return Err(Error::estimation("all reweighted summands vanished".to_string()));
    }
    Ok(Estimate::log_of_mean(&vals, seed))
}

/// The drift objective `E[F(T^v(W)) − ½∫|v_s|²ds]` (the representation's
/// right-hand side at a fixed drift).
pub fn rhs_objective(
    f: &Functional,
    v: &SimpleDrift,
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    f.validate_grid(grid)?;
    v.check_grid(grid)?;
    let vals = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let dv = v.values_along(&w).map_err(|e| at_path(e, i))?;
        let shifted = transform_with_values(&w, &dv, 1.0);
        let y = f.eval(&shifted);
        if !y.is_finite() {
            return Err(Error::eval(
                i,
                format!("functional {} not finite on shifted path (value {y})", f.name),
            ));
        }
        let (_, energy) = ito_sums(&w, &dv);
        Ok(y - 0.5 * energy)
    })?;
    Ok(Estimate::from_values(&vals, seed))
}

/// One row of a truncation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationRow {
    pub cap: f64,
    pub floor: Option<f64>,
    pub estimate: Estimate,
}

/// Truncation sweep: `log E[e^{F∧M}]` per cap `M`, and
/// `log E[e^{(F∨(-N))∧M}]` over the `(M, N)` grid, all from one common
/// path batch so the monotonicity in `M` and `N` holds pathwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationTable {
    pub m_sweep: Vec<TruncationRow>,
    pub mn_sweep: Vec<TruncationRow>,
}

pub fn truncation_sweep(
    f: &Functional,
    grid: &Arc<TimeGrid>,
    dim: usize,
    m_list: &[f64],
    n_list: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<TruncationTable> {
    f.validate_grid(grid)?;
    let raw = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let y = f.eval(&w);
        if y.is_nan() {
            return Err(Error::eval(i, "functional returned NaN".to_string()));
        }
        Ok(y)
    })?;
    let mut table = TruncationTable {
        m_sweep: Vec::new(),
        mn_sweep: Vec::new(),
    };
    for &m in m_list {
        let vals: Vec<f64> = raw.iter().map(|&y| y.min(m).exp()).collect();
        table.m_sweep.push(TruncationRow {
            cap: m,
            floor: None,
            estimate: Estimate::log_of_mean(&vals, seed),
        });
    }
    for &m in m_list {
        for &n in n_list {
            let vals: Vec<f64> = raw.iter().map(|&y| y.max(-n).min(m).exp()).collect();
            table.mn_sweep.push(TruncationRow {
                cap: m,
                floor: Some(n),
                estimate: Estimate::log_of_mean(&vals, seed),
            });
        }
    }
    Ok(table)
}

/// Declared growth-criterion constants for the negative part:
/// `log(1 + F₋(w)) ≤ c2·(1 + |w|^alpha) + c1·|w|²` with `c1 < ½`, `alpha < 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub constants: GrowthConstants,
    pub n_violations: u64,
    pub max_excess: f64,
}

/// Report of the integrability diagnostics: the mean of `e^F` with its
/// largest-summand share (heavy-tail monitor), the negative-part moment
/// `E[F₋^{1+δ}]`, and the pointwise growth check when constants are
/// declared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub exp_mean: Estimate,
    pub max_summand_share: f64,
    pub delta: f64,
    pub f_minus_moment: Estimate,
    pub growth: Option<GrowthCheck>,
}

pub fn validate_assumptions(
    f: &Functional,
    grid: &Arc<TimeGrid>,
    dim: usize,
    growth: Option<GrowthConstants>,
    n_paths: u64,
    seed: u64,
) -> Result<AssumptionReport> {
    f.validate_grid(grid)?;
    let delta = f
        .delta
        .ok_or_else(|| Error::config("functional carries no integrability exponent delta"))?;
    if let Some(g) = &growth {
        if !(g.c1 < 0.5 && g.alpha < 2.0 && g.c1 >= 0.0 && g.c2 >= 0.0 && g.alpha > 0.0) {
            return Err(Error::config(
                "growth constants must satisfy 0 ≤ c1 < 1/2, 0 < alpha < 2, c2 ≥ 0",
            ));
        }
    }
    struct Row {
        e_f: f64,
        f_minus_pow: f64,
        growth_excess: f64,
    }
    let rows = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let y = f.eval(&w);
        if y.is_nan() {
            return Err(Error::eval(i, "functional returned NaN".to_string()));
        }
        let f_minus = (-y).max(0.0);
        let growth_excess = match &growth {
            Some(g) => {
                let norm = w.sup_norm();
                (1.0 + f_minus).ln() - g.c2 * (1.0 + norm.powf(g.alpha)) - g.c1 * norm * norm
            }
            None => f64::NEG_INFINITY,
        };
        Ok(Row {
            e_f: y.exp(),
            f_minus_pow: f_minus.powf(1.0 + delta),
            growth_excess,
        })
    })?;
    let e_f: Vec<f64> = rows.iter().map(|r| r.e_f).collect();
    let total = estimate::pairwise_sum(&e_f);
    let max_share = if total > 0.0 {
        e_f.iter().cloned().fold(0.0, f64::max) / total
    } else {
        f64::NAN
    };
    let fm: Vec<f64> = rows.iter().map(|r| r.f_minus_pow).collect();
    let growth_check = growth.map(|constants| {
        let violations = rows.iter().filter(|r| r.growth_excess > 1e-12).count() as u64;
        let max_excess = rows
            .iter()
            .map(|r| r.growth_excess)
            .fold(f64::NEG_INFINITY, f64::max);
        GrowthCheck {
            constants,
            n_violations: violations,
            max_excess,
        }
    });
    Ok(AssumptionReport {
        exp_mean: Estimate::from_values(&e_f, seed),
        max_summand_share: max_share,
        delta,
        f_minus_moment: Estimate::from_values(&fm, seed),
        growth: growth_check,
    })
}

/// Margin of one drift against the lower bound: `lhs − objective` and the
/// same in combined-standard-error units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftMargin {
    pub objective: Estimate,
    pub margin: f64,
    pub margin_sigmas: f64,
}

/// Lower-bound suite: for each drift the objective must not exceed the
/// direct estimate beyond statistical noise (the lower bound is
/// unconditional, so a significant violation flags an implementation
/// bug, not a property of the inputs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub lhs: Estimate,
    pub margins: Vec<DriftMargin>,
    pub worst_margin_sigmas: f64,
    pub violation: bool,
}

pub fn lower_bound_suite(
    f: &Functional,
    drifts: &[SimpleDrift],
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<LowerBoundReport> {
    let lhs = estimate_lhs_direct(f, grid, dim, n_paths, seed)?;
    let mut margins = Vec::with_capacity(drifts.len());
    let mut worst = f64::INFINITY;
    for (j, v) in drifts.iter().enumerate() {
        let obj = rhs_objective(f, v, grid, dim, n_paths, crate::wiener::derive_seed(seed, j as u64 + 1))?;
        let margin = lhs.value - obj.value;
        let se = combined_stderr(&lhs, &obj).max(f64::MIN_POSITIVE);
        let sigmas = margin / se;
        worst = worst.min(sigmas);
        margins.push(DriftMargin {
            objective: obj,
            margin,
            margin_sigmas: sigmas,
        });
    }
    Ok(LowerBoundReport {
        lhs,
        margins,
        worst_margin_sigmas: worst,
        violation: worst < -3.0,
    })
}

/// Entropy identity check: under the tilted measure the log-weight mean
/// equals half the drift energy, `E[E^v_1 log E^v_1] = ½ E[E^v_1 ∫|v|²ds]`,
/// both sides realized by reweighting one common path batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub diff: f64,
    pub combined_stderr: f64,
    pub pass: bool,
}

pub fn entropy_identity_check(
    v: &SimpleDrift,
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<EntropyReport> {
    v.check_grid(grid)?;
    let rows = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let dv = v.values_along(&w).map_err(|e| at_path(e, i))?;
        let (si, energy) = ito_sums(&w, &dv);
        let weight = DoleansWeight::new(si, energy);
        Ok((weight.value * weight.log_value, 0.5 * weight.value * energy))
    })?;
    let lhs_vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs_vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let lhs = Estimate::from_values(&lhs_vals, seed);
    let rhs = Estimate::from_values(&rhs_vals, seed);
    let diff = lhs.value - rhs.value;
    let se = combined_stderr(&lhs, &rhs);
    Ok(EntropyReport {
        lhs,
        rhs,
        diff,
        combined_stderr: se,
        pass: diff.abs() <= 3.0 * se.max(1e-15),
    })
}
