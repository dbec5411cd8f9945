//! Deterministic quadrature: adaptive Gauss–Kronrod on finite intervals,
//! Gauss–Hermite rules for Gaussian expectations, and standard-normal
//! helpers.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

// 15-point Kronrod abscissae / weights and embedded 7-point Gauss weights
// (QUADPACK dqk15 constants).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One G7/K15 panel: returns `(kronrod value, error estimate)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[7];
    // odd Kronrod points coincide with the Gauss-7 points
    for (j, wg) in WG.iter().enumerate().take(3) {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let fsum = f(center - x) + f(center + x);
        res_g += wg * fsum;
        res_k += WGK[jtw] * fsum;
    }
    res_g += WG[3] * fc;
    for j in 0..4 {
        let jtw = 2 * j;
        let x = half * XGK[jtw];
        res_k += WGK[jtw] * (f(center - x) + f(center + x));
    }
    let err = ((res_k - res_g) * half).abs();
    (res_k * half, err)
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Splits the worst panel until the summed error estimate meets
/// `max(abs_tol, rel_tol·|value|)`. Errors out instead of silently
/// returning an unconverged value.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    adaptive_gk_split(f, a, b, abs_tol, rel_tol, 1)
}

/// [`adaptive_gk`] seeded with `init` uniform panels. Wide domains with
/// sharp interior peaks need the seeding: a single opening panel can
/// straddle the peak with every node in the flat region and converge to
/// the wrong answer.
pub fn adaptive_gk_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    init: usize,
) -> Result<f64> {
    const MAX_PANELS: usize = 4096;
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::config(format!("bad integration bounds [{a}, {b}]")));
    }
    let init = init.clamp(1, 256);
    let mut panels = Vec::with_capacity(init);
    for i in 0..init {
        let pa = a + (b - a) * i as f64 / init as f64;
        let pb = a + (b - a) * (i + 1) as f64 / init as f64;
        let (v, e) = gk15(f, pa, pb);
        panels.push(Panel {
            a: pa,
            b: pb,
            value: v,
            err: e,
        });
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if !total.is_finite() {
            return Err(Error::numeric("non-finite integrand in adaptive quadrature".to_string()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::numeric(format!(
                "adaptive quadrature failed to converge on [{a}, {b}]: error {err:.3e}"
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty panel list");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, mid);
        let (v2, e2) = gk15(f, mid, p.b);
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            err: e1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            err: e2,
        });
    }
}

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ wᵢ f(xᵢ)`
/// (physicists' convention), computed by Newton iteration on the
/// orthonormal Hermite recurrence and cached per order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: LazyLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
        LazyLock::new(|| Mutex::new(HashMap::new()));
    let mut cache = CACHE.lock().expect("gauss-hermite cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| compute_gauss_hermite(n))
        .clone()
}

fn compute_gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Gauss-Hermite order must be at least 2");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // orthonormal Hermite recurrence: p1 holds H̃_n(z)
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // stored descending in |x| on each half; order ascending for stable sums
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (
        idx.iter().map(|&i| x[i]).collect(),
        idx.iter().map(|&i| w[i]).collect(),
    )
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    static STD_NORMAL: LazyLock<Normal> =
        LazyLock::new(|| Normal::new(0.0, 1.0).expect("standard normal"));
    STD_NORMAL.cdf(x)
}

/// Standard normal quantile, polished by two Newton steps so it is
/// accurate to full precision even in the tails used by the certifier.
pub fn norm_inv_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");
    static STD_NORMAL: LazyLock<Normal> =
        LazyLock::new(|| Normal::new(0.0, 1.0).expect("standard normal"));
    let mut z = STD_NORMAL.inverse_cdf(p);
    for _ in 0..2 {
        let d = phi(z);
        if d <= f64::MIN_POSITIVE {
            break;
        }
        z -= (norm_cdf(z) - p) / d;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gk_integrates_gaussian_density() {
        let v = adaptive_gk(&phi, -12.0, 12.0, 1e-14, 1e-14).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn gk_integrates_kinked_absolute_value() {
        // ∫ |z| φ(z) dz = sqrt(2/π)
        let f = |z: f64| z.abs() * phi(z);
        let v = adaptive_gk(&f, -12.0, 12.0, 1e-13, 1e-13).unwrap();
        assert_abs_diff_eq!(v, (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_moments() {
        // ∫ x^{2k} e^{-x²} dx = Γ(k + ½) ; k = 0,1,2 → √π, √π/2, 3√π/4
        let sp = std::f64::consts::PI.sqrt();
        for order in [16usize, 32, 64] {
            let (x, w) = gauss_hermite(order);
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
            let m4: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(4)).sum();
            assert_abs_diff_eq!(m0, sp, epsilon = 1e-12);
            assert_abs_diff_eq!(m2, sp / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m4, 0.75 * sp, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_gaussian_expectation() {
        // E[e^Z] = e^{1/2} via the √2-substitution
        let (x, w) = gauss_hermite(32);
        let sp = std::f64::consts::PI.sqrt();
        let e: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * (std::f64::consts::SQRT_2 * xi).exp())
            .sum::<f64>()
            / sp;
        assert_abs_diff_eq!(e, (0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-9, 1e-6, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-6] {
            let z = norm_inv_cdf(p);
            assert_abs_diff_eq!(norm_cdf(z), p, epsilon = 1e-14 + 1e-12 * p);
        }
    }

    #[test]
    fn unconverged_quadrature_is_an_error() {
        // integrable singularity that the panel budget cannot resolve to 1e-14
        let f = |x: f64| if x > 0.0 { x.powf(-0.999) } else { 0.0 };
        assert!(adaptive_gk(&f, 0.0, 1.0, 1e-14, 1e-14).is_err());
    }
}
