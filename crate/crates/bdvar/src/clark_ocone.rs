//! The explicit optimal drift for cylinder functionals.
//!
//! For `F(w) = f(w(t₁), …, w(t_m))` the optimizing drift admits the
//! conditional-expectation form
//! `v_t = Σ_k 1_{[0,t_k]}(t) · E[e^F ∂_k f | F_t] / E[e^F | F_t]`,
//! which on the grid becomes a state feedback: at the left knot `s` of an
//! interval, the conditional law of the future cylinder coordinates given
//! `w(s) = x` is Gaussian, and the ratios are computed by Gauss–Hermite
//! quadrature with order escalation.
//!
//! Restricted to `d = 1` and `m ≤ 2` cylinder knots.

use crate::drift::{FeedbackFn, PathPast, SimpleDrift};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::quad::gauss_hermite;
use crate::wiener::TimeGrid;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Gauss–Hermite escalation schedule and convergence tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub orders: Vec<usize>,
    pub rel_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        // the pairwise convergence check is limited by the second-last
        // order's own error; the 128 rung is what certifies 1e-8 for
        // quadratic cylinders at states out to |x| ≈ 8
        QuadConfig {
            orders: vec![16, 32, 64, 128],
            rel_tol: 1e-8,
        }
    }
}

struct CoCore {
    times: Vec<f64>,
    f: Arc<dyn crate::functional::CylinderFn>,
    qc: QuadConfig,
}

impl CoCore {
    /// Drift value at time `s`, state `x`, with `known[k]` the observed
    /// values of cylinder coordinates whose knot lies at or before `s`.
    /// `active` marks the terms whose indicator covers the whole interval.
    fn value(&self, s: f64, x: f64, known: &[Option<f64>], active: &[bool]) -> Result<f64> {
        if !active.iter().any(|&a| a) {
            return Ok(0.0);
        }
        let mut prev: Option<f64> = None;
        for &order in &self.qc.orders {
            let v = self.value_at_order(order, s, x, known, active);
            if let Some(p) = prev {
                if (v - p).abs() <= self.qc.rel_tol * (1.0 + v.abs()) {
                    return Ok(v);
                }
            }
            prev = Some(v);
        }
        Err(Error::numeric(format!(
            "conditional-expectation quadrature did not converge at (t={s}, x={x})"
        )))
    }

    fn value_at_order(
        &self,
        order: usize,
        s: f64,
        x: f64,
        known: &[Option<f64>],
        active: &[bool],
    ) -> f64 {
        let m = self.times.len();
        let (nodes, weights) = gauss_hermite(order);
        // accumulate Σ w·e^{f−shift} and Σ w·e^{f−shift}·∂_k f over the
        // conditional Gaussian; a common shift keeps the exps in range
        let mut shift = f64::NEG_INFINITY;
        let mut eval_points: Vec<(f64, Vec<f64>)> = Vec::new();
        let push = |pts: &mut Vec<(f64, Vec<f64>)>, wgt: f64, ys: Vec<f64>| {
            pts.push((wgt, ys));
        };
        match m {
            1 => {
                if let Some(y1) = known[0] {
                    push(&mut eval_points, 1.0, vec![y1]);
                } else {
                    let tau = self.times[0] - s;
                    let sd = (2.0 * tau).sqrt();
                    for (zi, wi) in nodes.iter().zip(&weights) {
                        push(&mut eval_points, *wi, vec![x + sd * zi]);
                    }
                }
            }
            2 => match (known[0], known[1]) {
                (Some(y1), Some(y2)) => push(&mut eval_points, 1.0, vec![y1, y2]),
                (Some(y1), None) => {
                    let tau = self.times[1] - s;
                    let sd = (2.0 * tau).sqrt();
                    for (zi, wi) in nodes.iter().zip(&weights) {
                        push(&mut eval_points, *wi, vec![y1, x + sd * zi]);
                    }
                }
                (None, None) => {
                    let sd1 = (2.0 * (self.times[0] - s)).sqrt();
                    let sd2 = (2.0 * (self.times[1] - self.times[0])).sqrt();
                    for (zi, wi) in nodes.iter().zip(&weights) {
                        let y1 = x + sd1 * zi;
                        for (zj, wj) in nodes.iter().zip(&weights) {
                            push(&mut eval_points, wi * wj, vec![y1, y1 + sd2 * zj]);
                        }
                    }
                }
                (None, Some(_)) => unreachable!("knots are time-ordered"),
            },
            _ => unreachable!("validated m ≤ 2"),
        };
        for (_, ys) in &eval_points {
            shift = shift.max(self.f.value(ys));
        }
        let mut den = 0.0;
        let mut num = 0.0;
        for (wgt, ys) in &eval_points {
            let e = wgt * (self.f.value(ys) - shift).exp();
            den += e;
            let mut g = 0.0;
            for (k, act) in active.iter().enumerate() {
                if *act {
                    g += self.f.grad(ys, k);
                }
            }
            num += e * g;
        }
        num / den
    }
}

/// Build the optimal drift for a cylinder functional as a simple drift on
/// every grid interval. Quadrature convergence is probed eagerly on a
/// `(t, x)` grid so non-convergence surfaces here rather than mid-batch.
pub fn clark_ocone_drift(
    f: &Functional,
    grid: &Arc<TimeGrid>,
    qc: &QuadConfig,
) -> Result<SimpleDrift> {
    let spec = f
        .cylinder_spec()
        .ok_or_else(|| Error::config("optimal-drift construction needs a cylinder functional"))?;
    let m = spec.times.len();
    if m == 0 || m > 2 {
        return Err(Error::config("cylinder drift supports 1 or 2 knots"));
    }
    if qc.orders.is_empty() {
        return Err(Error::config("quadrature schedule is empty"));
    }
    f.validate_grid(grid)?;
    if spec.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("cylinder knots must be strictly increasing"));
    }
    let core = Arc::new(CoCore {
        times: spec.times.clone(),
        f: spec.f.clone(),
        qc: qc.clone(),
    });

    // eager convergence probe over representative states
    for j in 0..grid.n_steps() {
        let s = grid.knot(j);
        let (known_mask, active) = interval_layout(&core.times, s, grid.knot(j + 1));
        for &x in &[-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
            let known: Vec<Option<f64>> = known_mask.iter().map(|&k| k.then_some(x)).collect();
            core.value(s, x, &known, &active)?;
        }
    }

    let n = grid.n_steps();
    let mut feedbacks: Vec<FeedbackFn> = Vec::with_capacity(n);
    for j in 0..n {
        let s = grid.knot(j);
        let s_next = grid.knot(j + 1);
        let (known_mask, active) = interval_layout(&core.times, s, s_next);
        let core = core.clone();
        feedbacks.push(Arc::new(move |past: &PathPast<'_>, out: &mut [f64]| {
            let x = past.left()[0];
            let known: Vec<Option<f64>> = core
                .times
                .iter()
                .zip(&known_mask)
                .map(|(&t, &k)| {
                    if k {
                        past.value_at_time(t).map(|v| v[0])
                    } else {
                        None
                    }
                })
                .collect();
            if known.iter().zip(&known_mask) .any(|(v, &k)| k && v.is_none()) {
                out[0] = f64::NAN; // cylinder knot missing from the past
                return;
            }
            out[0] = core.value(s, x, &known, &active).unwrap_or(f64::NAN);
        }));
    }
    SimpleDrift::from_feedbacks(grid.clone(), grid.knots().to_vec(), 1, feedbacks, None)
}

/// Which cylinder coordinates are observed at the interval's left knot,
/// and which indicator terms cover the interval `(s, s_next]`.
fn interval_layout(times: &[f64], s: f64, s_next: f64) -> (Vec<bool>, Vec<bool>) {
    let known: Vec<bool> = times.iter().map(|&t| t <= s + 1e-12).collect();
    let active: Vec<bool> = times.iter().map(|&t| s_next <= t + 1e-12).collect();
    (known, active)
}

/// Closed-form optimal feedback for `f(x) = a·x²` at terminal time:
/// `v(t, x) = 2ax / (1 − 2a(1 − t))`. Used as the oracle in tests and in
/// the acceptance suite.
pub fn quadratic_terminal_feedback(a: f64, t: f64, x: f64) -> f64 {
    2.0 * a * x / (1.0 - 2.0 * a * (1.0 - t))
}
