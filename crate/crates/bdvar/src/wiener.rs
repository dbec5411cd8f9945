//! Discretized Wiener-space primitives.
//!
//! Paths are `d`-dimensional samples on a fixed knot set `0 = t₀ < … < tₙ = 1`
//! stored densely. Increments over interval `k` are independent
//! `N(0, Δt_k · I)`, one ChaCha stream per path index, so sampling is a
//! pure function of `(seed, path_index)`. Stochastic integrals are
//! left-point Itô sums throughout.

use crate::drift::SimpleDrift;
use crate::error::{Error, Result};
use crate::estimate::{self, Estimate};
use crate::functional::Functional;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Splitmix64 mixing, used to derive independent sub-seeds from a master
/// seed and a purpose tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG stream for one path: stream index = path index, key = seed.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index.wrapping_add(1));
    rng
}

/// Strictly increasing knots `t₀ = 0 < … < tₙ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with `n_steps` intervals on `[0, 1]`.
    pub fn uniform(n_steps: usize) -> Arc<TimeGrid> {
        assert!(n_steps >= 1, "grid needs at least one step");
        let knots = (0..=n_steps).map(|k| k as f64 / n_steps as f64).collect();
        Arc::new(TimeGrid { knots })
    }

    /// Grid from explicit knots; validates the invariants.
    pub fn from_knots(knots: Vec<f64>) -> Result<Arc<TimeGrid>> {
        if knots.len() < 2 {
            return Err(Error::config("grid needs at least two knots"));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::config("grid must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("grid knots must be strictly increasing"));
        }
        Ok(Arc::new(TimeGrid { knots }))
    }

    pub fn n_steps(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn knot(&self, k: usize) -> f64 {
        self.knots[k]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn dt(&self, interval: usize) -> f64 {
        self.knots[interval + 1] - self.knots[interval]
    }

    /// Knot index whose time equals `t` (to 1e-12), if any.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&t).expect("finite knots"))
        {
            Ok(i) => Some(i),
            Err(i) => {
                if i < self.knots.len() && (self.knots[i] - t).abs() <= 1e-12 {
                    Some(i)
                } else if i > 0 && (self.knots[i - 1] - t).abs() <= 1e-12 {
                    Some(i - 1)
                } else {
                    None
                }
            }
        }
    }
}

/// A `d`-dimensional path sampled at the grid knots, vanishing at the
/// origin. `values` is `[knot][coordinate]`-flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub grid: Arc<TimeGrid>,
    pub dim: usize,
    values: Vec<f64>,
}

impl WienerPath {
    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> WienerPath {
        assert!(dim >= 1);
        let n = grid.n_knots();
        WienerPath {
            grid,
            dim,
            values: vec![0.0; n * dim],
        }
    }

    pub fn from_values(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<WienerPath> {
        if values.len() != grid.n_knots() * dim {
            return Err(Error::config("value buffer does not match grid and dimension"));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::config("path must vanish at the origin"));
        }
        Ok(WienerPath { grid, dim, values })
    }

    /// Path value at knot `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// First coordinate at knot `k` (the common case `d = 1`).
    pub fn coord(&self, k: usize) -> f64 {
        self.values[k * self.dim]
    }

    /// Terminal value `w(1)`.
    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.n_knots() - 1)
    }

    /// Value at time `t` (must be a grid knot).
    pub fn value_at_time(&self, t: f64) -> Option<&[f64]> {
        self.grid.knot_index(t).map(|k| self.value(k))
    }

    /// Sup norm over the knots: `max_k |w(t_k)|`.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.n_knots())
            .map(|k| euclid(self.value(k)))
            .fold(0.0, f64::max)
    }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sample a standard Brownian path on `grid`; deterministic in
/// `(seed, path_index)`.
pub fn sample_wiener(grid: &Arc<TimeGrid>, dim: usize, seed: u64, path_index: u64) -> WienerPath {
    let mut rng = path_rng(seed, path_index);
    let mut path = WienerPath::zeros(grid.clone(), dim);
    for k in 0..grid.n_steps() {
        let sd = grid.dt(k).sqrt();
        for c in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            path.values[(k + 1) * dim + c] = path.values[k * dim + c] + sd * z;
        }
    }
    path
}

/// Absolutely continuous path with piecewise-constant derivative: one
/// `d`-vector slope per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinPath {
    pub grid: Arc<TimeGrid>,
    pub dim: usize,
    slopes: Vec<f64>,
}

impl CameronMartinPath {
    pub fn from_slopes(grid: Arc<TimeGrid>, dim: usize, slopes: Vec<f64>) -> Result<CameronMartinPath> {
        if slopes.len() != grid.n_steps() * dim {
            return Err(Error::config("slope buffer does not match grid and dimension"));
        }
        Ok(CameronMartinPath { grid, dim, slopes })
    }

    /// `h(t) = c·t` in one dimension: unit-slope generator scaled by `c`.
    pub fn linear(grid: Arc<TimeGrid>, c: f64) -> CameronMartinPath {
        let slopes = vec![c; grid.n_steps()];
        CameronMartinPath { grid, dim: 1, slopes }
    }

    pub fn slope(&self, interval: usize) -> &[f64] {
        &self.slopes[interval * self.dim..(interval + 1) * self.dim]
    }

    /// `|h|²_H = Σ_k |ḣ_k|² Δt_k`.
    pub fn h_norm_sq(&self) -> f64 {
        (0..self.grid.n_steps())
            .map(|k| {
                let s = self.slope(k);
                self.grid.dt(k) * s.iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Integrate the slopes into a path on the same grid.
    pub fn to_path(&self) -> WienerPath {
        let mut p = WienerPath::zeros(self.grid.clone(), self.dim);
        for k in 0..self.grid.n_steps() {
            let dt = self.grid.dt(k);
            for c in 0..self.dim {
                p.values[(k + 1) * self.dim + c] =
                    p.values[k * self.dim + c] + dt * self.slopes[k * self.dim + c];
            }
        }
        p
    }

    /// Left-point Stieltjes pairing `⟨l, w⟩ = Σ_k ḣ(t_k)·(w(t_{k+1}) − w(t_k))`.
    pub fn pairing(&self, w: &WienerPath) -> Result<f64> {
        if w.grid != self.grid || w.dim != self.dim {
            return Err(Error::config("pairing requires matching grid and dimension"));
        }
        let mut acc = 0.0;
        for k in 0..self.grid.n_steps() {
            let s = self.slope(k);
            let a = w.value(k);
            let b = w.value(k + 1);
            for c in 0..self.dim {
                acc += s[c] * (b[c] - a[c]);
            }
        }
        Ok(acc)
    }

    pub fn scaled(&self, c: f64) -> CameronMartinPath {
        CameronMartinPath {
            grid: self.grid.clone(),
            dim: self.dim,
            slopes: self.slopes.iter().map(|s| c * s).collect(),
        }
    }
}

/// `|h|²_H` of a Cameron–Martin path.
pub fn h_norm_sq(h: &CameronMartinPath) -> f64 {
    h.h_norm_sq()
}

/// Doléans exponential of a drift along one path, `exp(∫v·dW − ½∫|v|²ds)`,
/// with its building blocks kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoleansWeight {
    pub value: f64,
    pub log_value: f64,
    pub stochastic_integral: f64,
    pub energy: f64,
}

impl DoleansWeight {
    pub fn new(stochastic_integral: f64, energy: f64) -> DoleansWeight {
        let log_value = stochastic_integral - 0.5 * energy;
        DoleansWeight {
            value: log_value.exp(),
            log_value,
            stochastic_integral,
            energy,
        }
    }
}

/// Shift a path by the signed time integral of a drift:
/// `out(t_k) = w(t_k) + sign·Σ_{j<k} v_j(w) Δt_j`, with the feedback
/// reading the *input* path (left-point, adapted).
pub fn apply_drift_transform(path: &WienerPath, v: &SimpleDrift, sign: f64) -> Result<WienerPath> {
    let values = v.values_along(path)?;
    Ok(transform_with_values(path, &values, sign))
}

/// Same as [`apply_drift_transform`] when the per-interval drift values
/// have already been evaluated along the input path.
pub fn transform_with_values(path: &WienerPath, drift_values: &[f64], sign: f64) -> WienerPath {
    let dim = path.dim;
    let n = path.grid.n_steps();
    debug_assert_eq!(drift_values.len(), n * dim);
    let mut out = WienerPath::zeros(path.grid.clone(), dim);
    let mut cum = vec![0.0; dim];
    for k in 0..n {
        let dt = path.grid.dt(k);
        for c in 0..dim {
            cum[c] += drift_values[k * dim + c] * dt;
            out.values[(k + 1) * dim + c] = path.values[(k + 1) * dim + c] + sign * cum[c];
        }
    }
    out
}

/// Left-point Itô sum `Σ_k v_k · (w(t_{k+1}) − w(t_k))` and energy
/// `Σ_k |v_k|² Δt_k` for drift values along a path.
pub fn ito_sums(path: &WienerPath, drift_values: &[f64]) -> (f64, f64) {
    let dim = path.dim;
    let mut si = 0.0;
    let mut energy = 0.0;
    for k in 0..path.grid.n_steps() {
        let dt = path.grid.dt(k);
        let a = path.value(k);
        let b = path.value(k + 1);
        for c in 0..dim {
            let v = drift_values[k * dim + c];
            si += v * (b[c] - a[c]);
            energy += v * v * dt;
        }
    }
    (si, energy)
}

/// Doléans exponential `E^v_1` along one path.
pub fn doleans_exponential(path: &WienerPath, v: &SimpleDrift) -> Result<DoleansWeight> {
    let values = v.values_along(path)?;
    let (si, energy) = ito_sums(path, &values);
    Ok(DoleansWeight::new(si, energy))
}

/// Girsanov-reweighted Monte Carlo mean of `F`:
/// `E[E^v_1(W) · F(T^{-v}(W))]`, an unbiased estimator of `E[F(W)]`.
pub fn girsanov_reweighted_mean(
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
        let weight = DoleansWeight::new(si, energy).value;
        let shifted = transform_with_values(&w, &dv, -1.0);
        let y = f.eval(&shifted);
        if y.is_nan() {
            return Err(Error::eval(i, "functional returned NaN"));
        }
        Ok(weight * y)
    })?;
    Ok(Estimate::from_values(&vals, seed))
}

pub(crate) fn at_path(e: Error, path_index: u64) -> Error {
    match e {
        Error::Eval { message, .. } => Error::Eval {
            path_index,
            message,
        },
        other => other,
    }
}
