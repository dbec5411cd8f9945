//! Log-concavity scanning of parameterized log-partition functionals and
//! the Wiener-space Brascamp–Lieb moment inequality.
//!
//! The scanner estimates `g(λ) = log E[e^{G(W,λ)}]` on a λ grid with
//! common random numbers and tests midpoint concavity,
//! `g((λᵢ+λⱼ)/2) ≥ ½g(λᵢ) + ½g(λⱼ)`, for adjacent and skip-one pairs.
//! The joint-concavity hypothesis behind the concavity theorem — with its
//! `−½θ(1−θ)|w₁−w₂|²_H` penalty for Cameron–Martin separations — is
//! checked pointwise on sampled triples, so a failed scan can be traced to
//! a failed hypothesis rather than to the theorem.

use crate::error::{Error, Result};
use crate::estimate::{self, pairwise_sum, Estimate};
use crate::functional::Functional;
use crate::quad::adaptive_gk;
use crate::wiener::{derive_seed, path_rng, sample_wiener, CameronMartinPath, TimeGrid, WienerPath};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type ParamEvalFn = Arc<dyn Fn(&WienerPath, f64) -> f64 + Send + Sync>;

/// Parameterized path functional `G(w, λ)` with a scalar parameter on a
/// declared interval.
pub struct ParamFunctional {
    pub name: String,
    pub lambda_domain: (f64, f64),
    pub delta: Option<f64>,
    eval: ParamEvalFn,
}

impl ParamFunctional {
    pub fn new<F>(name: &str, lambda_domain: (f64, f64), f: F) -> ParamFunctional
    where
        F: Fn(&WienerPath, f64) -> f64 + Send + Sync + 'static,
    {
        ParamFunctional {
            name: name.to_string(),
            lambda_domain,
            delta: None,
            eval: Arc::new(f),
        }
    }

    /// `G(w, λ) = −(w(1) − λ)²/2`: log-partition `−λ²/4 − ½log 2`.
    pub fn gauss_well(lambda_domain: (f64, f64)) -> ParamFunctional {
        ParamFunctional::new("gauss-well", lambda_domain, |w, l| {
            let x = w.terminal()[0] - l;
            -0.5 * x * x
        })
    }

    /// `G(w, λ) = λ·w(1)`: log-partition `λ²/2`, convex — the scanner's
    /// negative control (it violates the joint-concavity hypothesis).
    pub fn linear_tilt(lambda_domain: (f64, f64)) -> ParamFunctional {
        ParamFunctional::new("linear-tilt", lambda_domain, |w, l| l * w.terminal()[0])
    }

    pub fn eval(&self, w: &WienerPath, lambda: f64) -> f64 {
        (self.eval)(w, lambda)
    }
}

/// One midpoint-concavity deficit `g(mid) − ½g(λᵢ) − ½g(λⱼ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeficitRow {
    pub i: usize,
    pub j: usize,
    pub mid_lambda: f64,
    pub deficit: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Scan report: per-λ estimates plus all midpoint deficits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub lambdas: Vec<f64>,
    pub values: Vec<Estimate>,
    pub deficits: Vec<DeficitRow>,
    pub verdict: Verdict,
    pub failures: Vec<String>,
}

/// Estimate `g(λ)` on the grid and at pair midpoints (one common path
/// batch) and test midpoint concavity with `3σ` slack.
pub fn scan_log_partition(
    g: &ParamFunctional,
    grid: &Arc<TimeGrid>,
    dim: usize,
    lambda_grid: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<ConcavityReport> {
    if lambda_grid.len() < 2 {
        return Err(Error::config("lambda grid needs at least two points"));
    }
    if lambda_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::config("lambda grid must be strictly increasing"));
    }
    let (lo, hi) = g.lambda_domain;
    if lambda_grid.iter().any(|&l| l < lo || l > hi) {
        return Err(Error::config("lambda grid leaves the declared domain"));
    }

    // evaluation set: grid points plus midpoints of adjacent and skip-one
    // pairs (the latter coincide with grid points on uniform grids)
    let m = lambda_grid.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..m - 1 {
        pairs.push((i, i + 1));
    }
    for i in 0..m.saturating_sub(2) {
        pairs.push((i, i + 2));
    }
    let mut eval_lambdas: Vec<f64> = lambda_grid.to_vec();
    let mut mid_index = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let mid = 0.5 * (lambda_grid[i] + lambda_grid[j]);
        let pos = eval_lambdas
            .iter()
            .position(|&l| (l - mid).abs() <= 1e-12)
            .unwrap_or_else(|| {
                eval_lambdas.push(mid);
                eval_lambdas.len() - 1
            });
        mid_index.push(pos);
    }

    // one pass over the common path batch, one exp row per λ
    let n_eval = eval_lambdas.len();
    let lambdas = eval_lambdas.clone();
    let rows = estimate::try_batch_map(n_paths, |p| {
        let w = sample_wiener(grid, dim, seed, p);
        let mut row = Vec::with_capacity(n_eval);
        for &l in &lambdas {
            let y = g.eval(&w, l);
            if y.is_nan() {
                return Err(Error::eval(p, format!("G({}, λ={l}) returned NaN", g.name)));
            }
            row.push(y.exp());
        }
        Ok(row)
    })?;

    let mut estimates = Vec::with_capacity(n_eval);
    let mut failures = Vec::new();
    for (c, &l) in eval_lambdas.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        if !pairwise_sum(&col).is_finite() || pairwise_sum(&col) <= 0.0 {
            failures.push(format!("estimation failed at λ = {l}"));
            estimates.push(Estimate::exact(f64::NAN, n_paths, seed));
        } else {
            estimates.push(Estimate::log_of_mean(&col, seed));
        }
    }

    let mut deficits = Vec::with_capacity(pairs.len());
    let mut any_fail = false;
    for (pi, &(i, j)) in pairs.iter().enumerate() {
        let gi = &estimates[i];
        let gj = &estimates[j];
        let gm = &estimates[mid_index[pi]];
        let deficit = gm.value - 0.5 * gi.value - 0.5 * gj.value;
        let stderr = (gm.stderr * gm.stderr
            + 0.25 * gi.stderr * gi.stderr
            + 0.25 * gj.stderr * gj.stderr)
            .sqrt();
        if deficit < -3.0 * stderr {
            any_fail = true;
        }
        deficits.push(DeficitRow {
            i,
            j,
            mid_lambda: eval_lambdas[mid_index[pi]],
            deficit,
            stderr,
        });
    }

    let verdict = if !failures.is_empty() {
        Verdict::Inconclusive
    } else if any_fail {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(ConcavityReport {
        lambdas: eval_lambdas[..m].to_vec(),
        values: estimates[..m].to_vec(),
        deficits,
        verdict,
        failures,
    })
}

/// One sampled violation of the joint-concavity hypothesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct B2Violation {
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub h_norm_sq: f64,
    pub slack: f64,
}

/// Hypothesis-check report: worst slack over the sampled triples (negative
/// beyond the 1e-9 tolerance means violated, and the scan then carries no
/// theorem guarantee).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct B2Report {
    pub n_checked: u64,
    pub violations: Vec<B2Violation>,
    pub worst_slack: f64,
    pub pass: bool,
}

const B2_TOL: f64 = 1e-9;

/// Sample `(w₂, h, λ₁, λ₂, θ)` triples with `w₁ = w₂ + h` a Cameron–Martin
/// perturbation and check
/// `G(θw₁+(1−θ)w₂, θλ₁+(1−θ)λ₂) ≥ θG(w₁,λ₁) + (1−θ)G(w₂,λ₂) − ½θ(1−θ)|h|²_H`.
///
/// The first perturbations are deterministic linear generators `h(t) = εt`
/// (small `|h|_H` exposes violations that random slopes can miss), the
/// rest are random piecewise slopes at three scales.
pub fn check_b2_hypothesis(
    g: &ParamFunctional,
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_triples: u64,
    seed: u64,
) -> Result<B2Report> {
    let thetas = [0.25, 0.5, 0.75];
    let (lo, hi) = g.lambda_domain;
    let deterministic: [f64; 6] = [1.0, -1.0, 0.5, -0.5, 0.1, -0.1];
    let mut violations = Vec::new();
    let mut worst: f64 = f64::INFINITY;
    let mut checked = 0u64;

    for trial in 0..n_triples {
        let mut rng = path_rng(derive_seed(seed, 0xb2), trial);
        let w2 = sample_wiener(grid, dim, derive_seed(seed, 0xb2b2), trial);
        let h = if (trial as usize) < deterministic.len() && dim == 1 {
            CameronMartinPath::linear(grid.clone(), deterministic[trial as usize])
        } else {
            let scale = [0.3, 1.0, 3.0][(trial % 3) as usize];
            let slopes: Vec<f64> = (0..grid.n_steps() * dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect();
            CameronMartinPath::from_slopes(grid.clone(), dim, slopes)?
        };
        let hsq = h.h_norm_sq();
        let hp = h.to_path();
        let mut w1 = w2.clone();
        for k in 0..grid.n_knots() {
            let add = hp.value(k).to_vec();
            for (c, a) in w1.value_mut(k).iter_mut().zip(add) {
                *c += a;
            }
        }
        let l1 = rng.random_range(lo..=hi);
        let l2 = rng.random_range(lo..=hi);
        for &theta in &thetas {
            let mut wm = w2.clone();
            for k in 0..grid.n_knots() {
                let a = w1.value(k).to_vec();
                for (c, av) in wm.value_mut(k).iter_mut().zip(a) {
                    *c = theta * av + (1.0 - theta) * *c;
                }
            }
            let lm = theta * l1 + (1.0 - theta) * l2;
            let lhs = g.eval(&wm, lm);
            let rhs = theta * g.eval(&w1, l1) + (1.0 - theta) * g.eval(&w2, l2)
                - 0.5 * theta * (1.0 - theta) * hsq;
            if !(lhs.is_finite() && rhs.is_finite()) {
                return Err(Error::eval(trial, "non-finite G in hypothesis check".to_string()));
            }
            let slack = lhs - rhs;
            worst = worst.min(slack);
            checked += 1;
            if slack < -B2_TOL {
                violations.push(B2Violation {
                    theta,
                    lambda1: l1,
                    lambda2: l2,
                    h_norm_sq: hsq,
                    slack,
                });
            }
        }
    }
    Ok(B2Report {
        n_checked: checked,
        pass: violations.is_empty(),
        violations,
        worst_slack: worst,
    })
}

/// A continuous linear functional on path space, represented by its
/// Cameron–Martin element (piecewise-constant derivative on the grid).
/// The pairing is the left-point Stieltjes sum
/// `⟨l, w⟩ = Σ_k l̇(t_k)·(w(t_{k+1}) − w(t_k))`.
#[derive(Debug, Clone)]
pub struct LinearFunctional {
    pub representer: CameronMartinPath,
    pub h_norm: f64,
}

impl LinearFunctional {
    pub fn new(representer: CameronMartinPath) -> Result<LinearFunctional> {
        let h_norm = representer.h_norm_sq().sqrt();
        if h_norm == 0.0 {
            return Err(Error::config("linear functional must be nonzero"));
        }
        Ok(LinearFunctional { representer, h_norm })
    }

    /// `l(t) = t` in one dimension (pairing = terminal value).
    pub fn terminal(grid: Arc<TimeGrid>) -> LinearFunctional {
        LinearFunctional::new(CameronMartinPath::linear(grid, 1.0)).expect("unit slope is nonzero")
    }

    pub fn pairing(&self, w: &WienerPath) -> Result<f64> {
        self.representer.pairing(w)
    }

    pub fn scaled(&self, c: f64) -> Result<LinearFunctional> {
        LinearFunctional::new(self.representer.scaled(c))
    }

    fn normalized(&self) -> LinearFunctional {
        LinearFunctional {
            representer: self.representer.scaled(1.0 / self.h_norm),
            h_norm: 1.0,
        }
    }
}

/// Split a path into its component along `l` and the orthogonal residual:
/// `w = w^l + z·l` with `z = ⟨l, w⟩` after normalizing `l` to unit norm.
/// Returns `(w^l, z)`; the reconstruction identity is exact at every knot.
pub fn conditional_decompose(
    path: &WienerPath,
    l: &LinearFunctional,
) -> Result<(WienerPath, f64)> {
    let ln = l.normalized();
    let z = ln.pairing(path)?;
    let lp = ln.representer.to_path();
    let mut res = path.clone();
    for k in 0..path.grid.n_knots() {
        let lv = lp.value(k).to_vec();
        for (c, lvc) in res.value_mut(k).iter_mut().zip(lv) {
            *c -= z * lvc;
        }
    }
    Ok((res, z))
}

/// Convex test function with declared polynomial growth (the growth
/// degree budgets the Gaussian-side quadrature cutoff).
pub struct PsiFn {
    pub name: String,
    pub growth_degree: u32,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl PsiFn {
    pub fn new<F>(name: &str, growth_degree: u32, f: F) -> PsiFn
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PsiFn {
            name: name.to_string(),
            growth_degree,
            eval: Arc::new(f),
        }
    }

    pub fn square() -> PsiFn {
        PsiFn::new("z^2", 2, |z| z * z)
    }

    pub fn abs() -> PsiFn {
        PsiFn::new("|z|", 1, f64::abs)
    }

    pub fn abs_cubed() -> PsiFn {
        PsiFn::new("|z|^3", 3, |z| z.abs().powi(3))
    }

    pub fn fourth() -> PsiFn {
        PsiFn::new("z^4", 4, |z| z.powi(4))
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.eval)(z)
    }
}

/// One ψ row of the Wiener Brascamp–Lieb check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlPsiRow {
    pub psi: String,
    /// Self-normalized tilted moment `E_Q[ψ(⟨l,W⟩ − E_Q⟨l,W⟩)]`.
    pub lhs: f64,
    /// Block-jackknife standard error of `lhs`.
    pub stderr: f64,
    /// Gaussian side `E[ψ(|l|_H · Z)]` by quadrature.
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlWienerReport {
    pub h_norm: f64,
    pub ess: f64,
    pub tilted_mean: f64,
    pub tilted_mean_stderr: f64,
    pub rows: Vec<BlPsiRow>,
    pub all_pass: bool,
}

const JACKKNIFE_BLOCKS: usize = 128;

/// Wiener-space Brascamp–Lieb check: self-normalized importance sampling
/// with weights `e^{F(W)}` against the Gaussian moment of variance
/// `|l|²_H`, asserted as `lhs ≤ rhs + 3σ` per convex ψ. The recentering
/// mean uses the same weight set as the outer expectation (plug-in), and
/// standard errors come from a delete-one-block jackknife that recomputes
/// the recentering per block.
pub fn wiener_bl_check(
    f: &Functional,
    l: &LinearFunctional,
    psis: &[PsiFn],
    grid: &Arc<TimeGrid>,
    dim: usize,
    n_paths: u64,
    seed: u64,
) -> Result<BlWienerReport> {
    f.validate_grid(grid)?;
    if psis.is_empty() {
        return Err(Error::config("need at least one convex test function"));
    }
    let rows = estimate::try_batch_map(n_paths, |i| {
        let w = sample_wiener(grid, dim, seed, i);
        let y = f.eval(&w);
        if y.is_nan() {
            return Err(Error::eval(i, "functional returned NaN".to_string()));
        }
        let x = l.pairing(&w)?;
        Ok((y.exp(), x))
    })?;
    let weights: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let wsum = pairwise_sum(&weights);
    let wsq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let ess = wsum * wsum / pairwise_sum(&wsq);
    if !(ess.is_finite() && ess >= 0.01 * n_paths as f64) {
        return Err(Error::estimation(format!(
            "weight degeneracy: effective sample size {ess:.1} below 1% of {n_paths}"
        )));
    }

    let wx: Vec<f64> = weights.iter().zip(&xs).map(|(w, x)| w * x).collect();
    let mu = pairwise_sum(&wx) / wsum;

    let n = n_paths as usize;
    let n_blocks = JACKKNIFE_BLOCKS.min(n);
    let block_of = |i: usize| i * n_blocks / n;
    let mut bw = vec![0.0; n_blocks];
    let mut bwx = vec![0.0; n_blocks];
    for i in 0..n {
        let b = block_of(i);
        bw[b] += weights[i];
        bwx[b] += wx[i];
    }
    let bwx_total = pairwise_sum(&bwx);

    // jackknife stderr of the recentering mean itself
    let mu_se = {
        let reps: Vec<f64> = (0..n_blocks)
            .map(|b| (bwx_total - bwx[b]) / (wsum - bw[b]))
            .collect();
        let rm = pairwise_sum(&reps) / n_blocks as f64;
        let ss: f64 = reps.iter().map(|r| (r - rm) * (r - rm)).sum();
        ((n_blocks as f64 - 1.0) / n_blocks as f64 * ss).sqrt()
    };

    let sigma = l.h_norm;
    let mut out_rows = Vec::with_capacity(psis.len());
    let mut all_pass = true;
    for psi in psis {
        // full-sample statistic with the plug-in recentering
        let full_vals: Vec<f64> = xs.iter().map(|&x| psi.eval(x - mu)).collect();
        let wv: Vec<f64> = weights.iter().zip(&full_vals).map(|(w, v)| w * v).collect();
        let lhs = pairwise_sum(&wv) / wsum;

        // leave-one-block-out replicates, recentering recomputed per block
        let mut reps = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let w_b = wsum - bw[b];
            let mu_b = (bwx_total - bwx[b]) / w_b;
            let mut acc = 0.0;
            for i in 0..n {
                if block_of(i) != b {
                    acc += weights[i] * psi.eval(xs[i] - mu_b);
                }
            }
            reps.push(acc / w_b);
        }
        let rep_mean = pairwise_sum(&reps) / n_blocks as f64;
        let ss: f64 = reps.iter().map(|r| (r - rep_mean) * (r - rep_mean)).sum();
        let se = ((n_blocks as f64 - 1.0) / n_blocks as f64 * ss).sqrt();

        let cut = 14.0 + psi.growth_degree as f64;
        let rhs = adaptive_gk(
            &|u: f64| psi.eval(sigma * u) * crate::quad::phi(u),
            -cut,
            cut,
            1e-12,
            1e-12,
        )?;
        let pass = lhs <= rhs + 3.0 * se;
        all_pass &= pass;
        out_rows.push(BlPsiRow {
            psi: psi.name.clone(),
            lhs,
            stderr: se,
            rhs,
            pass,
        });
    }
    Ok(BlWienerReport {
        h_norm: sigma,
        ess,
        tilted_mean: mu,
        tilted_mean_stderr: mu_se,
        rows: out_rows,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Arc<TimeGrid> {
        TimeGrid::uniform(16)
    }

    const HALF_LN2: f64 = 0.346_573_590_279_972_64;

    #[test]
    fn gauss_well_scan_matches_closed_form() {
        let g = ParamFunctional::gauss_well((-3.0, 3.0));
        let lambdas: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
        let rep = scan_log_partition(&g, &grid(), 1, &lambdas, 100_000, 3).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        for (l, e) in rep.lambdas.iter().zip(&rep.values) {
            let want = -l * l / 4.0 - HALF_LN2;
            assert!(
                (e.value - want).abs() <= 3.0 * e.stderr,
                "g({l}) = {} vs {want}",
                e.value
            );
        }
        for d in &rep.deficits {
            let dl = rep.lambdas[d.j] - rep.lambdas[d.i];
            let want = dl * dl / 16.0;
            assert!(
                (d.deficit - want).abs() <= 3.0 * d.stderr.max(1e-6),
                "deficit ({}, {}) = {} vs {want} ± {}",
                d.i,
                d.j,
                d.deficit,
                d.stderr,
            );
        }
    }

    #[test]
    fn linear_tilt_scan_is_flagged() {
        let g = ParamFunctional::linear_tilt((-3.0, 3.0));
        let lambdas: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
        let rep = scan_log_partition(&g, &grid(), 1, &lambdas, 100_000, 3).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
    }

    #[test]
    fn b2_gauss_well_passes_and_linear_tilt_fails() {
        let good = ParamFunctional::gauss_well((-3.0, 3.0));
        let rep = check_b2_hypothesis(&good, &grid(), 1, 200, 5).unwrap();
        assert!(rep.pass, "worst slack {}", rep.worst_slack);

        let bad = ParamFunctional::linear_tilt((-3.0, 3.0));
        let rep = check_b2_hypothesis(&bad, &grid(), 1, 200, 5).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn b2_convex_square_fails_on_linear_perturbation() {
        // G = +w(1)²: the hand counterexample is h(t) = t, θ = ½
        let g = ParamFunctional::new("w1-squared", (-1.0, 1.0), |w, _| {
            let x = w.terminal()[0];
            x * x
        });
        let rep = check_b2_hypothesis(&g, &grid(), 1, 200, 7).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn decompose_unit_slope_is_bridge() {
        let g = grid();
        let l = LinearFunctional::terminal(g.clone());
        // deterministic path w(t) = t: z = 1, residual = 0
        let unit = CameronMartinPath::linear(g.clone(), 1.0).to_path();
        let (res, z) = conditional_decompose(&unit, &l).unwrap();
        assert_abs_diff_eq!(z, 1.0, epsilon = 1e-12);
        for k in 0..=16 {
            assert_abs_diff_eq!(res.coord(k), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn decompose_identity_and_orthogonality() {
        let g = grid();
        let l = LinearFunctional::terminal(g.clone());
        let lp = l.normalized().representer.to_path();
        for i in 0..50 {
            let w = sample_wiener(&g, 1, 9, i);
            let (res, z) = conditional_decompose(&w, &l).unwrap();
            for k in 0..=16 {
                assert_abs_diff_eq!(res.coord(k) + z * lp.coord(k), w.coord(k), epsilon = 1e-12);
            }
        }
        // empirical orthogonality and bridge variance at interior knots
        let n = 100_000u64;
        for knot in [3usize, 8, 12] {
            let prods = estimate::batch_map(n, |i| {
                let w = sample_wiener(&g, 1, 10, i);
                let (res, z) = conditional_decompose(&w, &l).unwrap();
                (res.coord(knot) * z, res.coord(knot) * res.coord(knot))
            });
            let cov: Vec<f64> = prods.iter().map(|p| p.0).collect();
            let var: Vec<f64> = prods.iter().map(|p| p.1).collect();
            let cov = Estimate::from_values(&cov, 10);
            let var = Estimate::from_values(&var, 10);
            let t = g.knot(knot);
            assert!(cov.value.abs() <= 3.0 * cov.stderr);
            assert!(
                (var.value - (t - t * t)).abs() <= 3.0 * var.stderr,
                "Var(w^l({t})) = {} vs {}",
                var.value,
                t - t * t
            );
        }
    }

    #[test]
    fn bl_check_no_tilt_is_equality() {
        let g = grid();
        let f = Functional::custom("zero", |_| 0.0);
        let l = LinearFunctional::terminal(g.clone());
        let rep = wiener_bl_check(&f, &l, &[PsiFn::square()], &g, 1, 100_000, 11).unwrap();
        let row = &rep.rows[0];
        assert!(row.pass);
        assert!((row.lhs - 1.0).abs() <= 3.0 * row.stderr, "{row:?}");
        assert_abs_diff_eq!(row.rhs, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn bl_check_gaussian_absolute_moment() {
        let g = grid();
        let f = Functional::custom("zero", |_| 0.0);
        let l = LinearFunctional::terminal(g.clone());
        let rep = wiener_bl_check(&f, &l, &[PsiFn::abs()], &g, 1, 100_000, 12).unwrap();
        let row = &rep.rows[0];
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((row.lhs - want).abs() <= 3.0 * row.stderr);
        assert_abs_diff_eq!(row.rhs, want, epsilon = 1e-10);
    }

    #[test]
    fn bl_check_quartic_tilt_and_quadrature_cross_check() {
        let g = grid();
        // F = -w(1)^4
        let f = Functional::potential_terminal(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let l = LinearFunctional::terminal(g.clone());
        let rep = wiener_bl_check(
            &f,
            &l,
            &[PsiFn::square(), PsiFn::abs(), PsiFn::fourth()],
            &g,
            1,
            100_000,
            13,
        )
        .unwrap();
        assert!(rep.all_pass, "{rep:?}");
        // quadrature oracle for the tilted second moment (E_Q z = 0 by symmetry)
        let z0 = adaptive_gk(
            &|x: f64| (-x.powi(4)).exp() * crate::quad::phi(x),
            -8.0,
            8.0,
            1e-13,
            1e-13,
        )
        .unwrap();
        let m2 = adaptive_gk(
            &|x: f64| x * x * (-x.powi(4)).exp() * crate::quad::phi(x),
            -8.0,
            8.0,
            1e-13,
            1e-13,
        )
        .unwrap()
            / z0;
        let row_sq = &rep.rows[0];
        assert!(
            (row_sq.lhs - m2).abs() <= 3.0 * row_sq.stderr,
            "tilted variance {} vs quadrature {m2}",
            row_sq.lhs
        );
    }

    #[test]
    fn bl_verdict_invariant_under_scaling() {
        let g = grid();
        let f = Functional::potential_terminal(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let l = LinearFunctional::terminal(g.clone());
        let psis = || vec![PsiFn::square(), PsiFn::abs()];
        let base = wiener_bl_check(&f, &l, &psis(), &g, 1, 50_000, 14).unwrap();
        for c in [0.5, 2.0] {
            let lc = l.scaled(c).unwrap();
            let rep = wiener_bl_check(&f, &lc, &psis(), &g, 1, 50_000, 14).unwrap();
            for (a, b) in base.rows.iter().zip(&rep.rows) {
                assert_eq!(a.pass, b.pass);
            }
        }
    }

    #[test]
    fn normalized_weights_sum_to_one() {
        let weights = vec![0.125f64, 0.5, 2.0, 4.0, 1.0, 0.375];
        let s = pairwise_sum(&weights);
        let norm: Vec<f64> = weights.iter().map(|w| w / s).collect();
        assert!((pairwise_sum(&norm) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn degenerate_weights_error_out() {
        let g = grid();
        // weights concentrate on the largest w(1): e^{50·w(1)} at n=2000
        let f = Functional::custom("explosive-tilt", |w| 50.0 * w.terminal()[0]);
        let l = LinearFunctional::terminal(g.clone());
        match wiener_bl_check(&f, &l, &[PsiFn::square()], &g, 1, 2000, 15) {
            Err(Error::Estimation(_)) => {}
            other => panic!("expected estimation error, got {other:?}"),
        }
    }
}
