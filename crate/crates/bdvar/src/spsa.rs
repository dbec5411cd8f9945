//! Gradient-free maximization of the drift objective over a parametric
//! family by simultaneous-perturbation stochastic approximation.
//!
//! Two objective evaluations per step with common random numbers (the
//! same path seed on both sides of the perturbation), Rademacher
//! directions, gain schedules `a_k = a/(k+A)^0.602` and `c_k = c/k^0.101`,
//! and projection into the family box. The returned candidate is the
//! better of the trace maximizer and the tail-averaged iterate, re-scored
//! on a fresh, larger sample.

use crate::drift::DriftFamily;
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::functional::Functional;
use crate::variational::rhs_objective;
use crate::wiener::{derive_seed, TimeGrid};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Step-rule and budget parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    /// Step-size numerator `a`.
    pub a: f64,
    /// Stability constant `A`.
    pub big_a: f64,
    /// Perturbation numerator `c`.
    pub c: f64,
    /// Step-size decay exponent.
    pub alpha: f64,
    /// Perturbation decay exponent.
    pub gamma: f64,
    /// Iteration budget.
    pub iters: u64,
    /// Paths per objective evaluation.
    pub n_paths: u64,
    /// Paths for the final fresh evaluation.
    pub n_final: u64,
    /// Optional explicit start (defaults to the box origin).
    pub theta0: Option<Vec<f64>>,
    /// Record every `trace_stride`-th iterate (the first and last are
    /// always kept).
    pub trace_stride: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            a: 0.1,
            big_a: 10.0,
            c: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            iters: 500,
            n_paths: 4096,
            n_final: 65_536,
            theta0: None,
            trace_stride: 1,
        }
    }
}

/// One recorded iterate: the parameter vector after the update and the
/// average of the two perturbed objective values that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: u64,
    pub theta: Vec<f64>,
    pub objective: Estimate,
}

/// Full optimization record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterates: Vec<TracePoint>,
    /// Trace maximizer and its (noisy, in-loop) objective.
    pub best_theta: Vec<f64>,
    pub best_objective: Estimate,
    /// Fresh-sample re-evaluation of the returned candidate.
    pub final_theta: Vec<f64>,
    pub final_objective: Estimate,
    pub config: OptConfig,
}

/// Maximize `rhs_objective(F, family(θ))` over `θ`.
pub fn optimize_drift(
    f: &Functional,
    family: &DriftFamily,
    grid: &Arc<TimeGrid>,
    cfg: &OptConfig,
    seed: u64,
) -> Result<OptimizationTrace> {
    family.validate()?;
    f.validate_grid(grid)?;
    if cfg.iters == 0 {
        return Err(Error::config("optimizer needs at least one iteration"));
    }
    let dim_theta = family.param_len();
    let mut theta = match &cfg.theta0 {
        Some(t0) => {
            if t0.len() != dim_theta {
                return Err(Error::config("theta0 length does not match family"));
            }
            let mut t = t0.clone();
            family.clamp_theta(&mut t);
            t
        }
        None => family.theta_origin(),
    };

    let mut dir_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5b5a));
    let eval = |theta: &[f64], n: u64, s: u64| -> Result<Estimate> {
        let v = family.instantiate(grid, theta)?;
        rhs_objective(f, &v, grid, family.dim, n, s)
    };

    let mut iterates = Vec::new();
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_theta = theta.clone();
    let mut best_at = Estimate::exact(f64::NEG_INFINITY, 0, seed);
    let tail_start = cfg.iters / 2;
    let mut tail_acc = vec![0.0; dim_theta];
    let mut tail_n = 0u64;
    let mut consecutive_failures = 0u32;

    for k in 1..=cfg.iters {
        let ak = cfg.a / (k as f64 + cfg.big_a).powf(cfg.alpha);
        let ck = cfg.c / (k as f64).powf(cfg.gamma);
        let delta: Vec<f64> = (0..dim_theta)
            .map(|_| if dir_rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        for i in 0..dim_theta {
            plus[i] += ck * delta[i];
            minus[i] -= ck * delta[i];
        }
        family.clamp_theta(&mut plus);
        family.clamp_theta(&mut minus);

        // common random numbers: one path seed per iteration
        let path_seed = derive_seed(seed, k);
        let jp = eval(&plus, cfg.n_paths, path_seed);
        let jm = eval(&minus, cfg.n_paths, path_seed);
        let (jp, jm) = match (jp, jm) {
            (Ok(p), Ok(m)) if p.value.is_finite() && m.value.is_finite() => {
                consecutive_failures = 0;
                (p, m)
            }
            _ => {
                consecutive_failures += 1;
                if consecutive_failures >= 10 {
                    return Err(Error::Optimization(format!(
                        "objective unevaluable for {consecutive_failures} consecutive iterations near theta {theta:?}"
                    )));
                }
                continue;
            }
        };

        let ghat = (jp.value - jm.value) / (2.0 * ck);
        for i in 0..dim_theta {
            theta[i] += ak * ghat * delta[i];
        }
        family.clamp_theta(&mut theta);

        if k > tail_start {
            for i in 0..dim_theta {
                tail_acc[i] += theta[i];
            }
            tail_n += 1;
        }

        let mid = Estimate {
            value: 0.5 * (jp.value + jm.value),
            stderr: 0.5 * (jp.stderr * jp.stderr + jm.stderr * jm.stderr).sqrt(),
            n_samples: jp.n_samples + jm.n_samples,
            seed: path_seed,
        };
        if mid.value > best_obj {
            best_obj = mid.value;
            best_theta = theta.clone();
            best_at = mid;
        }
        if k == 1 || k == cfg.iters || k % cfg.trace_stride.max(1) == 0 {
            iterates.push(TracePoint {
                iter: k,
                theta: theta.clone(),
                objective: mid,
            });
        }
    }

    // final candidate: better of the trace maximizer and the tail average,
    // judged on one fresh larger sample
    let final_seed = derive_seed(seed, 0xf17a1);
    let mut tail_theta: Vec<f64> = tail_acc.iter().map(|s| s / tail_n.max(1) as f64).collect();
    family.clamp_theta(&mut tail_theta);
    let score_best = eval(&best_theta, cfg.n_final, final_seed)?;
    let score_tail = eval(&tail_theta, cfg.n_final, final_seed)?;
    let (final_theta, final_objective) = if score_tail.value >= score_best.value {
        (tail_theta, score_tail)
    } else {
        (best_theta.clone(), score_best)
    };

    Ok(OptimizationTrace {
        iterates,
        best_theta,
        best_objective: best_at,
        final_theta,
        final_objective,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::FamilyKind;

    #[test]
    fn constant_family_linear_fixture_recovers_optimum() {
        // F = w(1): optimal constant drift is 1 with objective ½
        let grid = TimeGrid::uniform(8);
        let f = Functional::linear_terminal(1.0);
        let fam = DriftFamily::new(FamilyKind::Constant, vec![0.0, 1.0], 1, 4.0);
        let cfg = OptConfig {
            a: 1.0,
            iters: 400,
            n_paths: 2048,
            n_final: 32_768,
            trace_stride: 10,
            ..OptConfig::default()
        };
        let trace = optimize_drift(&f, &fam, &grid, &cfg, 7).unwrap();
        assert!((trace.final_theta[0] - 1.0).abs() <= 0.05, "{:?}", trace.final_theta);
        assert!((trace.final_objective.value - 0.5).abs() <= 0.02);
    }

    #[test]
    fn constant_objective_drives_drift_to_zero() {
        // F ≡ b: any non-zero drift only pays energy
        let grid = TimeGrid::uniform(8);
        let f = Functional::custom("const", |_| 0.7);
        let fam = DriftFamily::new(FamilyKind::Constant, vec![0.0, 1.0], 1, 4.0);
        let cfg = OptConfig {
            a: 1.0,
            iters: 400,
            n_paths: 1024,
            n_final: 16_384,
            theta0: Some(vec![2.0]),
            trace_stride: 10,
            ..OptConfig::default()
        };
        let trace = optimize_drift(&f, &fam, &grid, &cfg, 9).unwrap();
        assert!(trace.final_theta[0].abs() <= 0.05, "{:?}", trace.final_theta);
        assert!((trace.final_objective.value - 0.7).abs() <= 0.02);
    }

    #[test]
    fn best_objective_is_trace_max() {
        let grid = TimeGrid::uniform(4);
        let f = Functional::linear_terminal(1.0);
        let fam = DriftFamily::new(FamilyKind::Constant, vec![0.0, 1.0], 1, 4.0);
        let cfg = OptConfig {
            iters: 50,
            n_paths: 256,
            n_final: 1024,
            trace_stride: 1,
            ..OptConfig::default()
        };
        let trace = optimize_drift(&f, &fam, &grid, &cfg, 3).unwrap();
        let trace_max = trace
            .iterates
            .iter()
            .map(|p| p.objective.value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(trace.best_objective.value, trace_max);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let grid = TimeGrid::uniform(4);
        let f = Functional::linear_terminal(1.0);
        let fam = DriftFamily::new(FamilyKind::Constant, vec![0.0, 1.0], 1, 4.0);
        let cfg = OptConfig {
            iters: 30,
            n_paths: 128,
            n_final: 512,
            ..OptConfig::default()
        };
        let a = optimize_drift(&f, &fam, &grid, &cfg, 5).unwrap();
        let b = optimize_drift(&f, &fam, &grid, &cfg, 5).unwrap();
        assert_eq!(a.final_objective.value.to_bits(), b.final_objective.value.to_bits());
        assert_eq!(a.final_theta, b.final_theta);
    }

    #[test]
    fn divergent_objective_reports_optimization_error() {
        let grid = TimeGrid::uniform(4);
        // rejects every shifted path
        let f = Functional::custom("always-reject", |_| f64::NEG_INFINITY);
        let fam = DriftFamily::new(FamilyKind::Constant, vec![0.0, 1.0], 1, 4.0);
        let cfg = OptConfig {
            iters: 50,
            n_paths: 64,
            n_final: 64,
            ..OptConfig::default()
        };
        match optimize_drift(&f, &fam, &grid, &cfg, 1) {
            Err(Error::Optimization(_)) => {}
            other => panic!("expected optimization error, got {other:?}"),
        }
    }
}
