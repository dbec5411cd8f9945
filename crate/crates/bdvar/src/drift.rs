//! Adapted drift processes: the simple-process class, parametric families
//! for optimization, and the conjugate constructions used to invert path
//! transforms.
//!
//! A [`SimpleDrift`] is piecewise constant in time on a subset of grid
//! knots; its level on interval `(t_k, t_{k+1}]` comes from a feedback rule
//! that may read the path only at knots `≤ t_k`. Adaptedness is enforced
//! structurally: feedbacks receive a [`PathPast`] view that refuses access
//! beyond its horizon.
//!
//! The conjugates are forward recursions, no fixed point needed:
//!
//! - `ṽ` evaluates each feedback on the running *un-shifted* path
//!   `u = w − ∫ṽ ds`, so that `T^v ∘ T^{-ṽ} = id` holds exactly on the grid;
//! - `v̄` evaluates each feedback on the running *shifted* path
//!   `u = w + ∫v̄ ds`, so that `T^{v̄} ∘ T^{-v} = id` and
//!   `v(w) = v̄(T^{-v}(w))` hold exactly on the grid.

use crate::error::{Error, Result};
use crate::estimate::{self, Estimate};
use crate::wiener::{TimeGrid, WienerPath};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Read-only view of a path restricted to knots `≤ upto` — the information
/// available to an adapted feedback at the left endpoint of its interval.
pub struct PathPast<'a> {
    path: &'a WienerPath,
    upto: usize,
}

impl<'a> PathPast<'a> {
    pub fn new(path: &'a WienerPath, upto: usize) -> PathPast<'a> {
        PathPast { path, upto }
    }

    /// Path value at knot `k`; panics if `k` lies beyond the horizon.
    pub fn value(&self, k: usize) -> &[f64] {
        assert!(k <= self.upto, "feedback tried to read the future");
        self.path.value(k)
    }

    /// Value at the horizon knot (the interval's left endpoint).
    pub fn left(&self) -> &[f64] {
        self.path.value(self.upto)
    }

    pub fn horizon(&self) -> usize {
        self.upto
    }

    pub fn time(&self, k: usize) -> f64 {
        assert!(k <= self.upto);
        self.path.grid.knot(k)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.path.grid
    }

    pub fn dim(&self) -> usize {
        self.path.dim
    }

    /// Value at an earlier time that must be a grid knot `≤` the horizon.
    pub fn value_at_time(&self, t: f64) -> Option<&[f64]> {
        let k = self.path.grid.knot_index(t)?;
        if k > self.upto {
            return None;
        }
        Some(self.path.value(k))
    }
}

/// Feedback rule: writes the `d`-vector drift level for its interval into
/// `out`, reading only the supplied past.
pub type FeedbackFn = Arc<dyn Fn(&PathPast<'_>, &mut [f64]) + Send + Sync>;

enum DriftRule {
    Feedback(Vec<FeedbackFn>),
    Tilde(Arc<SimpleDrift>),
    Bar(Arc<SimpleDrift>),
}

/// A simple adapted drift: knots on the grid plus per-interval feedback.
pub struct SimpleDrift {
    grid: Arc<TimeGrid>,
    dim: usize,
    /// Grid-knot indices of the drift knots: `0 = k₀ < … < k_m = n_steps`.
    knot_idx: Vec<usize>,
    rule: DriftRule,
    /// Optional clamp radius: feedback outputs are radially clamped to
    /// this Euclidean norm, which is what keeps a drift in the bounded
    /// class when a bound is declared.
    pub declared_bound: Option<f64>,
}

impl std::fmt::Debug for SimpleDrift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rule = match self.rule {
            DriftRule::Feedback(_) => "feedback",
            DriftRule::Tilde(_) => "tilde-conjugate",
            DriftRule::Bar(_) => "bar-conjugate",
        };
        f.debug_struct("SimpleDrift")
            .field("dim", &self.dim)
            .field("knots", &self.knot_times())
            .field("rule", &rule)
            .field("declared_bound", &self.declared_bound)
            .finish()
    }
}


impl SimpleDrift {
    /// Constant drift `v ≡ c` (single interval over the whole grid).
    pub fn constant(grid: Arc<TimeGrid>, value: Vec<f64>) -> SimpleDrift {
        let dim = value.len();
        let norm = value.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n = grid.n_steps();
        let v = value.clone();
        SimpleDrift {
            grid,
            dim,
            knot_idx: vec![0, n],
            rule: DriftRule::Feedback(vec![Arc::new(move |_past, out| {
                out.copy_from_slice(&v);
            })]),
            declared_bound: Some(norm),
        }
    }

    /// Piecewise-constant-in-time drift with the given knot times and one
    /// value per interval.
    pub fn piecewise_constant(
        grid: Arc<TimeGrid>,
        knot_times: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<SimpleDrift> {
        if values.is_empty() || values.len() + 1 != knot_times.len() {
            return Err(Error::config("need one drift value per knot interval"));
        }
        let dim = values[0].len();
        let bound = values
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let feedbacks: Vec<FeedbackFn> = values
            .into_iter()
            .map(|v| -> FeedbackFn {
                Arc::new(move |_past: &PathPast<'_>, out: &mut [f64]| out.copy_from_slice(&v))
            })
            .collect();
        SimpleDrift::from_feedbacks(grid, knot_times, dim, feedbacks, Some(bound))
    }

    /// General simple drift from knot times and feedback closures.
    pub fn from_feedbacks(
        grid: Arc<TimeGrid>,
        knot_times: Vec<f64>,
        dim: usize,
        feedbacks: Vec<FeedbackFn>,
        declared_bound: Option<f64>,
    ) -> Result<SimpleDrift> {
        if knot_times.len() < 2 || feedbacks.len() + 1 != knot_times.len() {
            return Err(Error::config("need one feedback per knot interval"));
        }
        let mut knot_idx = Vec::with_capacity(knot_times.len());
        for &t in &knot_times {
            let k = grid
                .knot_index(t)
                .ok_or_else(|| Error::config(format!("drift knot {t} is not a grid knot")))?;
            knot_idx.push(k);
        }
        if knot_idx[0] != 0 || *knot_idx.last().unwrap() != grid.n_steps() {
            return Err(Error::config("drift knots must start at 0 and end at 1"));
        }
        if knot_idx.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("drift knots must be strictly increasing"));
        }
        Ok(SimpleDrift {
            grid,
            dim,
            knot_idx,
            rule: DriftRule::Feedback(feedbacks),
            declared_bound,
        })
    }

    /// The conjugate `ṽ` with `ξ̃_k(w) = ξ_k(w − ∫₀^· ṽ ds)`; satisfies
    /// `T^v ∘ T^{-ṽ} = id` exactly on the grid.
    pub fn tilde_conjugate(v: &Arc<SimpleDrift>) -> SimpleDrift {
        SimpleDrift {
            grid: v.grid.clone(),
            dim: v.dim,
            knot_idx: v.knot_idx.clone(),
            rule: DriftRule::Tilde(v.clone()),
            declared_bound: v.declared_bound,
        }
    }

    /// The conjugate `v̄` with `ξ̄_k(w) = ξ_k(w + ∫₀^· v̄ ds)`; satisfies
    /// `T^{v̄} ∘ T^{-v} = id` and `v(w) = v̄(T^{-v}(w))` exactly on the grid.
    pub fn bar_conjugate(v: &Arc<SimpleDrift>) -> SimpleDrift {
        SimpleDrift {
            grid: v.grid.clone(),
            dim: v.dim,
            knot_idx: v.knot_idx.clone(),
            rule: DriftRule::Bar(v.clone()),
            declared_bound: v.declared_bound,
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of drift intervals.
    pub fn n_intervals(&self) -> usize {
        self.knot_idx.len() - 1
    }

    /// Drift knot times.
    pub fn knot_times(&self) -> Vec<f64> {
        self.knot_idx.iter().map(|&k| self.grid.knot(k)).collect()
    }

    pub fn check_grid(&self, grid: &Arc<TimeGrid>) -> Result<()> {
        if **grid != *self.grid {
            return Err(Error::config("drift grid does not match path grid"));
        }
        Ok(())
    }

    fn clamp(&self, out: &mut [f64]) {
        if let Some(k) = self.declared_bound {
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > k && norm > 0.0 {
                let s = k / norm;
                for v in out.iter_mut() {
                    *v *= s;
                }
            }
        }
    }

    /// Feedback value on drift interval `j`, reading `path` up to the
    /// interval's left knot.
    fn feedback_into(&self, j: usize, path: &WienerPath, out: &mut [f64]) -> Result<()> {
        match &self.rule {
            DriftRule::Feedback(fb) => {
                let past = PathPast::new(path, self.knot_idx[j]);
                fb[j](&past, out);
                self.clamp(out);
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::eval(0, format!("non-finite feedback output on interval {j}")));
                }
                Ok(())
            }
            DriftRule::Tilde(_) | DriftRule::Bar(_) => {
                let vals = self.values_upto(path, j)?;
                let gi = self.knot_idx[j];
                out.copy_from_slice(&vals[gi * self.dim..(gi + 1) * self.dim]);
                Ok(())
            }
        }
    }

    /// Evaluate the drift level on one interval (the `evaluate_drift`
    /// operation).
    pub fn evaluate(&self, path: &WienerPath, interval: usize) -> Result<Vec<f64>> {
        if interval >= self.n_intervals() {
            return Err(Error::config(format!(
                "interval index {interval} out of range ({} intervals)",
                self.n_intervals()
            )));
        }
        self.check_grid(&path.grid)?;
        let mut out = vec![0.0; self.dim];
        self.feedback_into(interval, path, &mut out)?;
        Ok(out)
    }

    /// Drift values per *grid* interval along a path (one forward sweep).
    pub fn values_along(&self, path: &WienerPath) -> Result<Vec<f64>> {
        self.values_upto(path, self.n_intervals() - 1)
    }

    /// Values per grid interval through drift interval `j_max`; later grid
    /// intervals are left at zero. Reads the path only at knots
    /// `≤ knot_idx[j_max]`, which is what makes prefix evaluation of the
    /// conjugate recursions legal.
    fn values_upto(&self, path: &WienerPath, j_max: usize) -> Result<Vec<f64>> {
        if path.dim != self.dim {
            return Err(Error::config("drift dimension does not match path"));
        }
        let dim = self.dim;
        let n = self.grid.n_steps();
        let mut out = vec![0.0; n * dim];
        match &self.rule {
            DriftRule::Feedback(_) => {
                let mut level = vec![0.0; dim];
                for j in 0..=j_max {
                    self.feedback_into(j, path, &mut level)?;
                    for gi in self.knot_idx[j]..self.knot_idx[j + 1] {
                        out[gi * dim..(gi + 1) * dim].copy_from_slice(&level);
                    }
                }
            }
            DriftRule::Tilde(inner) => {
                self.conjugate_sweep(inner, path, j_max, -1.0, &mut out)?;
            }
            DriftRule::Bar(inner) => {
                self.conjugate_sweep(inner, path, j_max, 1.0, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Shared forward recursion for both conjugates: maintain the running
    /// transformed path `u = w + sign·∫(this drift) ds` and evaluate the
    /// inner drift's feedback on `u`.
    fn conjugate_sweep(
        &self,
        inner: &Arc<SimpleDrift>,
        path: &WienerPath,
        j_max: usize,
        sign: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let dim = self.dim;
        let mut u = WienerPath::zeros(self.grid.clone(), dim);
        let mut cum = vec![0.0; dim];
        let mut level = vec![0.0; dim];
        for j in 0..=j_max {
            inner.feedback_into(j, &u, &mut level)?;
            for gi in self.knot_idx[j]..self.knot_idx[j + 1] {
                out[gi * dim..(gi + 1) * dim].copy_from_slice(&level);
                let dt = self.grid.dt(gi);
                let w_next = path.value(gi + 1);
                let u_next: Vec<f64> = (0..dim)
                    .map(|c| {
                        cum[c] += level[c] * dt;
                        w_next[c] + sign * cum[c]
                    })
                    .collect();
                u.value_mut(gi + 1).copy_from_slice(&u_next);
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the squared drift norm `E[∫₀¹ |v_s|² ds]`
/// (left-point quadrature).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ANormSq {
    pub value: f64,
    pub stderr: f64,
}

pub fn a_norm_sq(v: &SimpleDrift, n_paths: u64, seed: u64) -> Result<ANormSq> {
    let grid = v.grid().clone();
    let dim = v.dim();
    let vals = estimate::try_batch_map(n_paths, |i| {
        let w = crate::wiener::sample_wiener(&grid, dim, seed, i);
        let dv = v.values_along(&w).map_err(|e| crate::wiener::at_path(e, i))?;
        let (_, energy) = crate::wiener::ito_sums(&w, &dv);
        Ok(energy)
    })?;
    let est = Estimate::from_values(&vals, seed);
    Ok(ANormSq {
        value: est.value,
        stderr: est.stderr,
    })
}

/// Parametric drift families over which the variational supremum is
/// searched.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DriftFamily {
    pub kind: FamilyKind,
    /// Knot times (grid knots), `0 = t₀ < … < t_m = 1`.
    pub knots: Vec<f64>,
    pub dim: usize,
    /// Per-parameter box bounds.
    #[serde(rename = "box")]
    pub box_bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Constant,
    PiecewiseConstantInTime,
    LinearStateFeedback,
}

impl DriftFamily {
    pub fn new(kind: FamilyKind, knots: Vec<f64>, dim: usize, half_width: f64) -> DriftFamily {
        let mut fam = DriftFamily {
            kind,
            knots,
            dim,
            box_bounds: Vec::new(),
        };
        fam.box_bounds = vec![(-half_width, half_width); fam.param_len()];
        fam
    }

    /// Number of intervals between family knots.
    pub fn n_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn param_len(&self) -> usize {
        match self.kind {
            FamilyKind::Constant => self.dim,
            FamilyKind::PiecewiseConstantInTime => self.n_intervals() * self.dim,
            // per interval: an offset d-vector plus one scalar state gain
            FamilyKind::LinearStateFeedback => self.n_intervals() * (self.dim + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() < 2 {
            return Err(Error::config("family needs at least two knots"));
        }
        if self.dim == 0 {
            return Err(Error::config("family dimension must be positive"));
        }
        if self.box_bounds.len() != self.param_len() {
            return Err(Error::config(format!(
                "family box has {} entries, expected {}",
                self.box_bounds.len(),
                self.param_len()
            )));
        }
        if self.box_bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::config("family box bounds must satisfy lo < hi"));
        }
        Ok(())
    }

    /// Project a parameter vector into the box.
    pub fn clamp_theta(&self, theta: &mut [f64]) {
        for (t, (lo, hi)) in theta.iter_mut().zip(&self.box_bounds) {
            *t = t.clamp(*lo, *hi);
        }
    }

    /// Box center, the default optimizer start.
    pub fn theta_origin(&self) -> Vec<f64> {
        self.box_bounds
            .iter()
            .map(|(lo, hi)| 0.0f64.clamp(*lo, *hi))
            .collect()
    }

    /// Instantiate the drift at parameter `theta` on `grid`.
    pub fn instantiate(&self, grid: &Arc<TimeGrid>, theta: &[f64]) -> Result<SimpleDrift> {
        self.validate()?;
        if theta.len() != self.param_len() {
            return Err(Error::config(format!(
                "theta has {} entries, family expects {}",
                theta.len(),
                self.param_len()
            )));
        }
        for (t, (lo, hi)) in theta.iter().zip(&self.box_bounds) {
            if !t.is_finite() || *t < lo - 1e-12 || *t > hi + 1e-12 {
                return Err(Error::config(format!("theta component {t} outside box [{lo}, {hi}]")));
            }
        }
        let dim = self.dim;
        match self.kind {
            FamilyKind::Constant => Ok(SimpleDrift::constant(grid.clone(), theta.to_vec())),
            FamilyKind::PiecewiseConstantInTime => {
                let values = theta.chunks(dim).map(|c| c.to_vec()).collect();
                SimpleDrift::piecewise_constant(grid.clone(), self.knots.clone(), values)
            }
            FamilyKind::LinearStateFeedback => {
                let m = self.n_intervals();
                let offsets = &theta[..m * dim];
                let gains = &theta[m * dim..];
                let feedbacks: Vec<FeedbackFn> = (0..m)
                    .map(|k| -> FeedbackFn {
                        let b: Vec<f64> = offsets[k * dim..(k + 1) * dim].to_vec();
                        let g = gains[k];
                        Arc::new(move |past: &PathPast<'_>, out: &mut [f64]| {
                            let x = past.left();
                            for (c, o) in out.iter_mut().enumerate() {
                                *o = b[c] + g * x[c];
                            }
                        })
                    })
                    .collect();
                SimpleDrift::from_feedbacks(grid.clone(), self.knots.clone(), dim, feedbacks, None)
            }
        }
    }
}
