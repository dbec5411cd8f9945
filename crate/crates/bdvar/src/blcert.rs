//! Brascamp–Lieb certification for nonconvex one-dimensional potentials.
//!
//! Inputs are a `C²` potential `V` with a Gaussian reference `N(0, σ²)`
//! and the tilted law `dQ ∝ e^{-V(x)} ν(dx)`. The certifier computes
//! `log Z`, locates the nonconvexity region `D_V = {V'' ≤ 0}`, and checks
//! the sufficient conditions
//!
//! - `inf_{D_V} U_V ≥ log Z` with `U_V = ½σ²V'² + xV' − V`, and
//! - `inf_{D_V} (−x²/2σ² − V) ≥ log Z` (stronger hypothesis, weaker
//!   condition: `U_V` dominates it pointwise),
//!
//! under either of which the convex-moment inequality
//! `E[ψ(X − EX)] ≤ E[ψ(Y)]` holds. The mechanism is verified directly:
//! the transport `g = F_X⁻¹ ∘ Φ` pushing `N(0,1)` onto `X` must satisfy
//! `g' ≤ σ`, equivalently `G(ξ) = σF_X'∘F_X⁻¹(ξ) − Φ'∘Φ⁻¹(ξ) ≥ 0` on
//! `(0,1)`. Everything here is deterministic quadrature; no sampling.

use crate::error::{Error, Result};
use crate::functional::horner;
use crate::prekopa::PsiFn;
use crate::quad::{adaptive_gk, adaptive_gk_split, norm_cdf, norm_inv_cdf, phi};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const SCAN_POINTS: usize = 4096;
const INF_SCAN_POINTS: usize = 2048;
const GOLDEN_WIDTH: f64 = 1e-10;
const DV_TOL: f64 = 1e-12;
const TAIL_BUDGET: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum PotentialForm {
    /// Polynomial coefficients, ascending powers; derivatives are exact.
    Poly(Vec<f64>),
    /// User-supplied callables; derivative consistency is cross-checked
    /// by central differences at construction.
    Callables {
        v: ScalarFn,
        dv: ScalarFn,
        ddv: ScalarFn,
    },
}

/// A twice-differentiable scalar potential with its Gaussian reference
/// width, an optional declared linear floor `V(x) ≥ ax + b` (which
/// certifies the truncation remainder), and the truncation half-width.
#[derive(Clone)]
pub struct Potential1D {
    form: PotentialForm,
    pub sigma: f64,
    pub floor: Option<(f64, f64)>,
    pub r: f64,
}

fn poly_derive(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

impl Potential1D {
    pub fn from_poly(coeffs: Vec<f64>, sigma: f64, floor: Option<(f64, f64)>) -> Result<Potential1D> {
        let p = Potential1D {
            form: PotentialForm::Poly(coeffs),
            sigma,
            floor,
            r: 12.0 * sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_callables<V, D, D2>(
        v: V,
        dv: D,
        ddv: D2,
        sigma: f64,
        floor: Option<(f64, f64)>,
    ) -> Result<Potential1D>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let p = Potential1D {
            form: PotentialForm::Callables {
                v: Arc::new(v),
                dv: Arc::new(dv),
                ddv: Arc::new(ddv),
            },
            sigma,
            floor,
            r: 12.0 * sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// The double-well `V(x) = ½α²x⁴ − ½βx²` with its exact floor
    /// `V ≥ −β²/(8α²)`.
    pub fn double_well(alpha: f64, beta: f64) -> Result<Potential1D> {
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::config("double-well parameters must be positive"));
        }
        let floor = Some((0.0, -beta * beta / (8.0 * alpha * alpha)));
        Potential1D::from_poly(
            vec![0.0, 0.0, -0.5 * beta, 0.0, 0.5 * alpha * alpha],
            1.0,
            floor,
        )
    }

    pub fn with_truncation(mut self, r: f64) -> Result<Potential1D> {
        if r <= 0.0 {
            return Err(Error::config("truncation half-width must be positive"));
        }
        self.r = r;
        Ok(self)
    }

    pub fn v(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Poly(c) => horner(c, x),
            PotentialForm::Callables { v, .. } => v(x),
        }
    }

    pub fn dv(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Poly(c) => horner(&poly_derive(c), x),
            PotentialForm::Callables { dv, .. } => dv(x),
        }
    }

    pub fn ddv(&self, x: f64) -> f64 {
        match &self.form {
            PotentialForm::Poly(c) => horner(&poly_derive(&poly_derive(c)), x),
            PotentialForm::Callables { ddv, .. } => ddv(x),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::config("sigma must be positive"));
        }
        let r = self.r;
        for i in 0..=SCAN_POINTS {
            let x = -r + 2.0 * r * i as f64 / SCAN_POINTS as f64;
            let (v, dv, ddv) = (self.v(x), self.dv(x), self.ddv(x));
            if !(v.is_finite() && dv.is_finite() && ddv.is_finite()) {
                return Err(Error::config(format!("potential not finite at x = {x}")));
            }
            if let Some((a, b)) = self.floor {
                if v < a * x + b - 1e-9 {
                    return Err(Error::config(format!(
                        "declared linear floor violated at x = {x}: V = {v}, floor = {}",
                        a * x + b
                    )));
                }
            }
        }
        if let PotentialForm::Callables { .. } = self.form {
            // finite-difference cross-check of the supplied derivatives
            let h = 1e-5;
            for i in 0..=64 {
                let x = -r + 2.0 * r * i as f64 / 64.0;
                let fd1 = (self.v(x + h) - self.v(x - h)) / (2.0 * h);
                if (fd1 - self.dv(x)).abs() > 1e-4 * (1.0 + self.dv(x).abs()) {
                    return Err(Error::config(format!(
                        "first derivative mismatch at x = {x}: callable {}, finite difference {fd1}",
                        self.dv(x)
                    )));
                }
                let fd2 = (self.dv(x + h) - self.dv(x - h)) / (2.0 * h);
                if (fd2 - self.ddv(x)).abs() > 1e-4 * (1.0 + self.ddv(x).abs()) {
                    return Err(Error::config(format!(
                        "second derivative mismatch at x = {x}: callable {}, finite difference {fd2}",
                        self.ddv(x)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Gaussian reference density `φ_σ`.
    fn ref_density(&self, x: f64) -> f64 {
        phi(x / self.sigma) / self.sigma
    }

    /// Unnormalized tilted density `e^{-V(x)} φ_σ(x)`, computed through a
    /// single exponential so that a large negative `V` cannot overflow
    /// against the Gaussian factor.
    fn tilted_density(&self, x: f64) -> f64 {
        let u = x / self.sigma;
        (-self.v(x) - 0.5 * u * u).exp()
            / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// The certification potential `U_V(x) = ½σ²V'² + xV' − V`.
    pub fn u_potential(&self, x: f64) -> f64 {
        let d = self.dv(x);
        0.5 * self.sigma * self.sigma * d * d + x * d - self.v(x)
    }

    /// The weaker certification curve `h(x) = −x²/(2σ²) − V(x)`.
    pub fn h_curve(&self, x: f64) -> f64 {
        -x * x / (2.0 * self.sigma * self.sigma) - self.v(x)
    }
}

/// Normalization of the tilted law with its truncation error budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionZ {
    pub z: f64,
    pub log_z: f64,
    /// Remainder bound for the mass outside `[-R, R]`; certified when the
    /// linear floor is declared, otherwise an extension estimate.
    pub tail_bound: f64,
    pub tail_certified: bool,
}

/// Closed-form bound on `∫_{|x|>R} e^{-ax-b} φ_σ(x) dx`.
fn floor_tail_bound(a: f64, b: f64, sigma: f64, r: f64) -> f64 {
    let right = 1.0 - norm_cdf(r / sigma + a * sigma);
    let left = norm_cdf(-r / sigma + a * sigma);
    (0.5 * a * a * sigma * sigma - b).exp() * (right + left)
}

/// `Z = E[e^{-V(Y)}]` by adaptive quadrature on `[-R, R]` plus the
/// certified tail remainder.
pub fn partition_z(p: &Potential1D) -> Result<PartitionZ> {
    let f = |x: f64| p.tilted_density(x);
    let z = adaptive_gk_split(&f, -p.r, p.r, 1e-15, 1e-13, 64)?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::numeric(format!("partition function not positive: {z}")));
    }
    let (tail, certified) = match p.floor {
        Some((a, b)) => (floor_tail_bound(a, b, p.sigma, p.r), true),
        None => {
            // no certificate: estimate by extending the domain by half
            let wider = adaptive_gk_split(&f, -1.5 * p.r, 1.5 * p.r, 1e-15, 1e-13, 96)?;
            ((wider - z).abs(), false)
        }
    };
    if certified && tail > TAIL_BUDGET {
        return Err(Error::numeric(format!(
            "tail remainder {tail:.3e} exceeds the {TAIL_BUDGET:.0e} budget; increase the truncation half-width"
        )));
    }
    Ok(PartitionZ {
        z,
        log_z: z.ln(),
        tail_bound: tail,
        tail_certified: certified,
    })
}

/// Closed intervals of `[-R, R]` where `V'' ≤ 0`, endpoints refined by
/// bisection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonconvexRegion {
    pub intervals: Vec<(f64, f64)>,
}

impl NonconvexRegion {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

pub fn nonconvex_region(p: &Potential1D) -> NonconvexRegion {
    let r = p.r;
    let inside = |x: f64| p.ddv(x) <= DV_TOL;
    let xs: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| -r + 2.0 * r * i as f64 / SCAN_POINTS as f64)
        .collect();
    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for w in 0..SCAN_POINTS {
        let (a, b) = (xs[w], xs[w + 1]);
        match (inside(a), inside(b)) {
            (false, true) => start = Some(refine_boundary(p, a, b)),
            (true, false) => {
                let s = start.take().unwrap_or(-r);
                intervals.push((s, refine_boundary(p, a, b)));
            }
            _ => {}
        }
        if w == 0 && inside(a) {
            start = Some(-r);
        }
    }
    if let Some(s) = start {
        intervals.push((s, r));
    }
    NonconvexRegion { intervals }
}

/// Bisection refinement of the sign change of `V'' − tol` on `[a, b]`.
fn refine_boundary(p: &Potential1D, mut a: f64, mut b: f64) -> f64 {
    let g = |x: f64| p.ddv(x) - DV_TOL;
    let mut ga = g(a);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-10 {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if (ga <= 0.0) == (gm <= 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Minimum of `f` on `[a, b]`: dense scan, tie broken toward the smallest
/// `|x|`, then golden-section refinement around the winner.
fn infimum_on(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let n = INF_SCAN_POINTS;
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut best = 0usize;
    let mut best_abs = f64::INFINITY;
    for (i, (&x, &v)) in xs.iter().zip(&vals).enumerate() {
        if v <= vmin + 1e-12 && x.abs() < best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    let lo = if best == 0 { xs[0] } else { xs[best - 1] };
    let hi = if best == n { xs[n] } else { xs[best + 1] };
    let (x, v) = golden_section(f, lo, hi);
    if v <= vals[best] {
        (x, v)
    } else {
        (xs[best], vals[best])
    }
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_WIDTH {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Certification report: the two infima over the nonconvexity region
/// against `log Z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlConditionReport {
    pub log_z: f64,
    /// `inf_{D_V} U_V` (`+∞` when the region is empty).
    pub inf_u_on_d: f64,
    /// `inf_{D_V} (−x²/2σ² − V)`.
    pub inf_h_on_d: f64,
    pub argmin_u: Option<f64>,
    pub argmin_h: Option<f64>,
    pub cond_inf1_holds: bool,
    pub cond_inf2_holds: bool,
    /// Knife-edge flag: an infimum within 1e-9 of `log Z` is decided by
    /// the slack band and reported here.
    pub marginal: bool,
    pub region: NonconvexRegion,
}

impl BlConditionReport {
    pub fn certified(&self) -> bool {
        self.cond_inf1_holds || self.cond_inf2_holds
    }
}

pub fn certify_conditions(p: &Potential1D) -> Result<BlConditionReport> {
    let z = partition_z(p)?;
    let region = nonconvex_region(p);
    let mut inf_u = f64::INFINITY;
    let mut inf_h = f64::INFINITY;
    let mut arg_u = None;
    let mut arg_h = None;
    for &(a, b) in &region.intervals {
        let (xu, vu) = infimum_on(&|x| p.u_potential(x), a, b);
        if vu < inf_u {
            inf_u = vu;
            arg_u = Some(xu);
        }
        let (xh, vh) = infimum_on(&|x| p.h_curve(x), a, b);
        if vh < inf_h {
            inf_h = vh;
            arg_h = Some(xh);
        }
    }
    const MARGIN: f64 = 1e-9;
    let cond1 = inf_u >= z.log_z - MARGIN;
    let cond2 = inf_h >= z.log_z - MARGIN;
    let marginal = (inf_u - z.log_z).abs() <= MARGIN || (inf_h - z.log_z).abs() <= MARGIN;
    debug_assert!(inf_u >= inf_h - 1e-9, "U_V dominates the h-curve pointwise");
    Ok(BlConditionReport {
        log_z: z.log_z,
        inf_u_on_d: inf_u,
        inf_h_on_d: inf_h,
        argmin_u: arg_u,
        argmin_h: arg_h,
        cond_inf1_holds: cond1,
        cond_inf2_holds: cond2,
        marginal,
        region,
    })
}

/// Closed-form infima for the double-well family at `σ = 1`:
/// `(inf h, inf U_V) = (β(5β−6)/(72α²) ∧ 0, β²(8β−9)/(216α²) ∧ 0)`.
pub fn double_well_closed_forms(alpha: f64, beta: f64) -> (f64, f64) {
    let h = (beta * (5.0 * beta - 6.0) / (72.0 * alpha * alpha)).min(0.0);
    let u = (beta * beta * (8.0 * beta - 9.0) / (216.0 * alpha * alpha)).min(0.0);
    (h, u)
}

/// Tabulated distribution function of the tilted law and the machinery to
/// invert it: the carrier of the transport map `g = F_X⁻¹ ∘ Φ`.
///
/// Two tables are kept, the cumulative from the left and the survivor
/// from the right, built independently from the same segment integrals.
/// Right-half quantiles are inverted against the survivor, which avoids
/// the catastrophic `F − ξ` cancellation near 1 that would otherwise cost
/// seven digits at the tail quantiles the transport map needs.
pub struct BassEmbedding {
    p: Potential1D,
    pub z: f64,
    pub log_z: f64,
    xs: Vec<f64>,
    /// Normalized cumulative values at `xs`, clamped into `(0, 1)`.
    fx: Vec<f64>,
    /// Normalized survivor values `1 − F_X` at `xs`, built from the right.
    sx: Vec<f64>,
    /// Index range on which the table is strictly increasing (the numeric
    /// support; the far tails underflow for steep potentials).
    support: (usize, usize),
}

/// Cumulative table of `F_X` on `[-R, R]` (4096 segments of adaptive
/// quadrature), endpoint-clamped into `(0, 1)`.
pub fn distribution_fx(p: &Potential1D) -> Result<BassEmbedding> {
    let z = partition_z(p)?;
    let n = SCAN_POINTS;
    let r = p.r;
    let xs: Vec<f64> = (0..=n).map(|i| -r + 2.0 * r * i as f64 / n as f64).collect();
    let mut segs = Vec::with_capacity(n);
    for w in 0..n {
        let seg = adaptive_gk(&|x| p.tilted_density(x), xs[w], xs[w + 1], 1e-17, 1e-13)?;
        if seg < 0.0 {
            return Err(Error::numeric(format!(
                "non-monotone cumulative table near x = {}",
                xs[w]
            )));
        }
        segs.push(seg);
    }
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for &s in &segs {
        acc += s;
        cum.push(acc);
    }
    let mut surv = vec![0.0; n + 1];
    let mut acc_r = 0.0;
    for w in (0..n).rev() {
        acc_r += segs[w];
        surv[w] = acc_r;
    }
    let clamp = |v: f64| (v).clamp(1e-300, 1.0 - 1e-16);
    let fx: Vec<f64> = cum.iter().map(|c| clamp(c / z.z)).collect();
    let sx: Vec<f64> = surv.iter().map(|c| clamp(c / z.z)).collect();
    // strictly increasing sub-range = numeric support
    let mut lo = 0;
    while lo + 1 < fx.len() && fx[lo + 1] <= fx[lo] {
        lo += 1;
    }
    let mut hi = fx.len() - 1;
    while hi > 0 && sx[hi - 1] <= sx[hi] {
        hi -= 1;
    }
    if lo >= hi {
        return Err(Error::numeric("distribution table has no increasing range".to_string()));
    }
    for w in lo..hi.min(fx.len() - 1) {
        if fx[w + 1] < fx[w] || sx[w + 1] > sx[w] {
            return Err(Error::numeric(format!(
                "distribution table not monotone at x = {}",
                xs[w]
            )));
        }
    }
    Ok(BassEmbedding {
        p: p.clone(),
        z: z.z,
        log_z: z.log_z,
        xs,
        fx,
        sx,
        support: (lo, hi),
    })
}

impl BassEmbedding {
    fn segment_of(&self, x: f64) -> usize {
        let r = self.p.r;
        let i = ((x + r) / (2.0 * r) * SCAN_POINTS as f64).floor() as usize;
        i.min(SCAN_POINTS - 1)
    }

    /// `F_X(x)`: nearest table entry plus a local quadrature correction.
    pub fn fx_at(&self, x: f64) -> Result<f64> {
        let r = self.p.r;
        if x <= -r {
            return Ok(self.fx[0]);
        }
        if x >= r {
            return Ok(*self.fx.last().unwrap());
        }
        let i = self.segment_of(x);
        let seg = adaptive_gk(&|u| self.p.tilted_density(u), self.xs[i], x, 1e-18, 1e-13)
            .unwrap_or(0.0);
        Ok((self.fx[i] + seg / self.z).clamp(1e-300, 1.0 - 1e-16))
    }

    /// Survivor `1 − F_X(x)`, evaluated against the right-built table.
    pub fn sx_at(&self, x: f64) -> Result<f64> {
        let r = self.p.r;
        if x <= -r {
            return Ok(self.sx[0]);
        }
        if x >= r {
            return Ok(*self.sx.last().unwrap());
        }
        let i = self.segment_of(x);
        let seg = adaptive_gk(&|u| self.p.tilted_density(u), x, self.xs[i + 1], 1e-18, 1e-13)
            .unwrap_or(0.0);
        Ok((self.sx[i + 1] + seg / self.z).clamp(1e-300, 1.0 - 1e-16))
    }

    /// Density of the tilted law, `F_X'(x) = e^{-V(x)} φ_σ(x) / Z`.
    pub fn fx_prime(&self, x: f64) -> f64 {
        self.p.tilted_density(x) / self.z
    }

    /// `F_X⁻¹(ξ)` by monotone bisection on the table bracket plus a
    /// Newton polish. The flag reports far-tail clamping (argument
    /// outside the numeric support).
    pub fn fx_inv(&self, xi: f64) -> Result<(f64, bool)> {
        self.fx_inv_with_comp(xi, 1.0 - xi)
    }

    /// Inversion with the complement `1 − ξ` supplied exactly by the
    /// caller, so tail quantiles on either side keep full precision.
    pub fn fx_inv_with_comp(&self, xi: f64, comp: f64) -> Result<(f64, bool)> {
        let (lo, hi) = self.support;
        if !(0.0 < xi && xi < 1.0) {
            return Err(Error::config(format!("quantile argument {xi} outside (0,1)")));
        }
        if xi <= self.fx[lo] {
            return Ok((self.xs[lo], true));
        }
        if comp <= self.sx[hi] {
            return Ok((self.xs[hi], true));
        }
        let left_side = xi <= 0.5;
        // bracketing segment in the appropriate table
        let (mut a, mut b) = (lo, hi);
        while b - a > 1 {
            let m = (a + b) / 2;
            let below = if left_side {
                self.fx[m] <= xi
            } else {
                self.sx[m] >= comp
            };
            if below {
                a = m;
            } else {
                b = m;
            }
        }
        let (mut xa, mut xb) = (self.xs[a], self.xs[b]);
        for _ in 0..60 {
            if xb - xa <= 1e-14 * (1.0 + xa.abs()) {
                break;
            }
            let m = 0.5 * (xa + xb);
            let below = if left_side {
                self.fx_at(m)? <= xi
            } else {
                self.sx_at(m)? >= comp
            };
            if below {
                xa = m;
            } else {
                xb = m;
            }
        }
        let mut y = 0.5 * (xa + xb);
        // Newton polish against the density (dS/dy = −F_X')
        for _ in 0..4 {
            let d = self.fx_prime(y);
            if d <= f64::MIN_POSITIVE {
                break;
            }
            let residual = if left_side {
                self.fx_at(y)? - xi
            } else {
                comp - self.sx_at(y)?
            };
            let y_new = (y - residual / d).clamp(self.xs[lo], self.xs[hi]);
            if (y_new - y).abs() <= 1e-16 * (1.0 + y.abs()) {
                y = y_new;
                break;
            }
            y = y_new;
        }
        Ok((y, false))
    }
}

/// The transport map `g = F_X⁻¹∘Φ` with its derivative, tabulated on
/// `x ∈ [-6, 6]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BassG {
    pub xs: Vec<f64>,
    pub g: Vec<f64>,
    pub g_prime: Vec<f64>,
    pub max_g_prime: f64,
    pub sigma: f64,
    pub clamp_warnings: u64,
}

const BASS_TABLE_POINTS: usize = 1201;

/// Tabulate `g(x) = F_X⁻¹(Φ(x))` and
/// `g'(x) = Φ'(x) / F_X'(F_X⁻¹(Φ(x)))` on `[-6, 6]`.
pub fn bass_g(emb: &BassEmbedding) -> Result<BassG> {
    let mut xs = Vec::with_capacity(BASS_TABLE_POINTS);
    let mut g = Vec::with_capacity(BASS_TABLE_POINTS);
    let mut gp = Vec::with_capacity(BASS_TABLE_POINTS);
    let mut clamps = 0u64;
    let mut max_gp = f64::NEG_INFINITY;
    for i in 0..BASS_TABLE_POINTS {
        let x = -6.0 + 12.0 * i as f64 / (BASS_TABLE_POINTS - 1) as f64;
        // both the quantile and its complement computed without cancellation
        let (y, clamped) = emb.fx_inv_with_comp(norm_cdf(x), norm_cdf(-x))?;
        if clamped {
            clamps += 1;
        }
        let d = emb.fx_prime(y);
        let gpx = if d > f64::MIN_POSITIVE {
            phi(x) / d
        } else {
            clamps += 1;
            0.0
        };
        max_gp = max_gp.max(gpx);
        xs.push(x);
        g.push(y);
        gp.push(gpx);
    }
    // g must be nondecreasing (the table only briefly flattens where the
    // quantile underflows)
    if g.windows(2).any(|w| w[1] < w[0] - 1e-9) {
        return Err(Error::numeric("transport map is not monotone".to_string()));
    }
    Ok(BassG {
        xs,
        g,
        g_prime: gp,
        max_g_prime: max_gp,
        sigma: emb.p.sigma,
        clamp_warnings: clamps,
    })
}

/// Report on `G(ξ) = σF_X'∘F_X⁻¹(ξ) − Φ'∘Φ⁻¹(ξ)` over a ξ grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapitalGReport {
    pub xis: Vec<f64>,
    pub values: Vec<f64>,
    pub min_value: f64,
    pub argmin: f64,
    /// `|G|` at ξ = 1e-6 and 1 − 1e-6 (boundary decay check: both must
    /// fall below 1e-4).
    pub boundary_low: f64,
    pub boundary_high: f64,
    pub boundary_decay_ok: bool,
    pub nonnegative: bool,
}

/// Default ξ grid: dense uniform interior plus the boundary probes.
pub fn default_xi_grid() -> Vec<f64> {
    let mut grid = vec![1e-6];
    for i in 1..SCAN_POINTS {
        grid.push(i as f64 / SCAN_POINTS as f64);
    }
    grid.push(1.0 - 1e-6);
    grid
}

pub fn capital_g_check(emb: &BassEmbedding, xi_grid: &[f64]) -> Result<CapitalGReport> {
    if xi_grid.iter().any(|&x| !(0.0 < x && x < 1.0)) {
        return Err(Error::config("xi grid must lie in (0,1)"));
    }
    let sigma = emb.p.sigma;
    let g_of = |xi: f64| -> Result<f64> {
        let (y, _) = emb.fx_inv(xi)?;
        Ok(sigma * emb.fx_prime(y) - phi(norm_inv_cdf(xi)))
    };
    let mut values = Vec::with_capacity(xi_grid.len());
    let mut min_v = f64::INFINITY;
    let mut argmin = xi_grid[0];
    for &xi in xi_grid {
        let v = g_of(xi)?;
        if v < min_v {
            min_v = v;
            argmin = xi;
        }
        values.push(v);
    }
    let boundary_low = g_of(1e-6)?.abs();
    let boundary_high = g_of(1.0 - 1e-6)?.abs();
    Ok(CapitalGReport {
        xis: xi_grid.to_vec(),
        values,
        min_value: min_v,
        argmin,
        boundary_low,
        boundary_high,
        boundary_decay_ok: boundary_low < 1e-4 && boundary_high < 1e-4,
        nonnegative: min_v >= -1e-6,
    })
}

/// One convex-moment comparison row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentRow {
    pub psi: String,
    /// `E[ψ(X − EX)]` under the tilted law, by quadrature.
    pub lhs: f64,
    /// `E[ψ(Y)]` under the Gaussian reference, by quadrature.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub certified: bool,
    pub mean_x: f64,
    pub var_x: f64,
    pub rows: Vec<MomentRow>,
    /// Quadrature tail budget for the worst ψ (floor-certified when the
    /// floor is declared).
    pub tail_budget: f64,
    pub all_hold: bool,
}

/// Convex-moment comparison `E[ψ(X − EX)]` vs `E[ψ(Y)]` by quadrature on
/// both sides. When certification fails the comparison is still evaluated
/// and reported (the conditions are sufficient, not necessary).
pub fn moment_inequality_check(p: &Potential1D, psis: &[PsiFn]) -> Result<MomentReport> {
    if psis.is_empty() {
        return Err(Error::config("need at least one convex test function"));
    }
    let cert = certify_conditions(p)?;
    let z = partition_z(p)?;
    let r = p.r;
    let q_mean = adaptive_gk_split(&|x| x * p.tilted_density(x), -r, r, 1e-14, 1e-12, 64)? / z.z;
    let q_var = adaptive_gk_split(
        &|x| (x - q_mean) * (x - q_mean) * p.tilted_density(x),
        -r,
        r,
        1e-14,
        1e-12,
        64,
    )? / z.z;
    let mut rows = Vec::with_capacity(psis.len());
    let mut all_hold = true;
    let mut worst_tail = 0.0f64;
    for psi in psis {
        let lhs = adaptive_gk_split(
            &|x| psi.eval(x - q_mean) * p.tilted_density(x),
            -r,
            r,
            1e-14,
            1e-12,
            64,
        )? / z.z;
        let cut = (14.0 + psi.growth_degree as f64) * p.sigma;
        let rhs = adaptive_gk_split(&|y| psi.eval(y) * p.ref_density(y), -cut, cut, 1e-14, 1e-12, 16)?;
        // tail budget for the tilted side via the linear floor
        let tail = match p.floor {
            Some((a, b)) => {
                let deg = psi.growth_degree as i32;
                let bound = |x: f64| {
                    (1.0 + (x.abs() + q_mean.abs()).powi(deg))
                        * (-a * x - b).exp()
                        * p.ref_density(x)
                        / z.z
                };
                adaptive_gk(&bound, r, r + 30.0 * p.sigma, 1e-16, 1e-10).unwrap_or(f64::NAN)
                    + adaptive_gk(&bound, -r - 30.0 * p.sigma, -r, 1e-16, 1e-10)
                        .unwrap_or(f64::NAN)
            }
            None => f64::NAN,
        };
        worst_tail = worst_tail.max(tail);
        let holds = lhs <= rhs + 1e-10;
        all_hold &= holds;
        rows.push(MomentRow {
            psi: psi.name.clone(),
            lhs,
            rhs,
            holds,
        });
    }
    Ok(MomentReport {
        certified: cert.certified(),
        mean_x: q_mean,
        var_x: q_var,
        rows,
        tail_budget: worst_tail,
        all_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat() -> Potential1D {
        Potential1D::from_poly(vec![0.0], 1.0, Some((0.0, 0.0))).unwrap()
    }

    #[test]
    fn partition_z_examples() {
        // V ≡ 0 → log Z = 0
        let z = partition_z(&flat()).unwrap();
        assert_abs_diff_eq!(z.log_z, 0.0, epsilon = 1e-12);
        assert!(z.tail_certified && z.tail_bound <= TAIL_BUDGET);
        // V = x → log Z = ½ (Gaussian shift)
        let p = Potential1D::from_poly(vec![0.0, 1.0], 1.0, Some((1.0, 0.0))).unwrap();
        assert_abs_diff_eq!(partition_z(&p).unwrap().log_z, 0.5, epsilon = 1e-11);
        // V = x²/2 → log Z = −½ log 2
        let p = Potential1D::from_poly(vec![0.0, 0.0, 0.5], 1.0, Some((0.0, 0.0))).unwrap();
        assert_abs_diff_eq!(partition_z(&p).unwrap().log_z, -0.5 * 2.0f64.ln(), epsilon = 1e-11);
    }

    #[test]
    fn u_potential_values() {
        // V with V(0) = V'(0) = 0 → U_V(0) = 0
        let p = Potential1D::from_poly(vec![0.0, 0.0, 0.0, 1.0], 1.0, None).unwrap();
        assert_eq!(p.u_potential(0.0), 0.0);
        // V = x²/2, σ = 1 → U_V = x²
        let p = Potential1D::from_poly(vec![0.0, 0.0, 0.5], 1.0, Some((0.0, 0.0))).unwrap();
        for x in [-2.0, -0.5, 0.7, 3.0] {
            assert_abs_diff_eq!(p.u_potential(x), x * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn nonconvex_region_cases() {
        // convex → empty
        let p = Potential1D::from_poly(vec![0.0, 0.0, 0.5], 1.0, Some((0.0, 0.0))).unwrap();
        assert!(nonconvex_region(&p).is_empty());
        // double-well → single interval ±sqrt(β/(6α²))
        let p = Potential1D::double_well(1.0, 1.0).unwrap();
        let reg = nonconvex_region(&p);
        assert_eq!(reg.intervals.len(), 1);
        let c = (1.0f64 / 6.0).sqrt();
        assert_abs_diff_eq!(reg.intervals[0].0, -c, epsilon = 1e-9);
        assert_abs_diff_eq!(reg.intervals[0].1, c, epsilon = 1e-9);
        // concave everywhere (fixture, no floor) → whole domain
        let p = Potential1D::from_poly(vec![0.0, 0.0, -0.25], 1.0, None)
            .unwrap()
            .with_truncation(30.0)
            .unwrap();
        let reg = nonconvex_region(&p);
        assert_eq!(reg.intervals.len(), 1);
        assert_abs_diff_eq!(reg.intervals[0].0, -30.0);
        assert_abs_diff_eq!(reg.intervals[0].1, 30.0);
    }

    #[test]
    fn double_well_certification_values() {
        let p = Potential1D::double_well(1.0, 1.0).unwrap();
        let rep = certify_conditions(&p).unwrap();
        assert_abs_diff_eq!(rep.inf_h_on_d, -1.0 / 72.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.inf_u_on_d, -1.0 / 216.0, epsilon = 1e-6);
        assert!(rep.inf_u_on_d >= rep.inf_h_on_d);

        let p = Potential1D::double_well(5.0, 2.0).unwrap();
        let rep = certify_conditions(&p).unwrap();
        assert_eq!(rep.inf_h_on_d, 0.0);
        assert!(rep.log_z < 0.0, "log Z = {}", rep.log_z);
        assert_abs_diff_eq!(rep.log_z, -0.906_301_645_981_554_4, epsilon = 1e-9);
        assert!(rep.cond_inf2_holds && rep.cond_inf1_holds);
    }

    #[test]
    fn closed_forms_match_numeric_infima_on_grid() {
        for &alpha in &[0.5, 1.0, 2.0, 5.0, 10.0] {
            for &beta in &[0.5, 1.0, 1.2, 2.0, 3.0] {
                let p = Potential1D::double_well(alpha, beta).unwrap();
                let rep = certify_conditions(&p).unwrap();
                let (h_cf, u_cf) = double_well_closed_forms(alpha, beta);
                assert_abs_diff_eq!(rep.inf_h_on_d, h_cf, epsilon = 1e-6);
                assert_abs_diff_eq!(rep.inf_u_on_d, u_cf, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let (h, u) = double_well_closed_forms(1.0, 1.0);
        assert_abs_diff_eq!(h, -1.0 / 72.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u, -1.0 / 216.0, epsilon = 1e-15);
        let (h, u) = double_well_closed_forms(1.0, 1.2);
        assert_eq!(h, 0.0);
        assert_eq!(u, 0.0);
        let (h, u) = double_well_closed_forms(10.0, 1.0);
        assert_abs_diff_eq!(h, -1.0 / 7200.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u, -1.0 / 21600.0, epsilon = 1e-15);
    }

    #[test]
    fn fx_table_flat_potential_is_normal_cdf() {
        let emb = distribution_fx(&flat()).unwrap();
        for &x in &[-3.0, -1.5, -0.2, 0.0, 0.4, 2.2, 3.5, -4.0, 4.0] {
            assert_abs_diff_eq!(emb.fx_at(x).unwrap(), norm_cdf(x), epsilon = 1e-10);
        }
        // even potential → F_X(0) = ½
        let dw = distribution_fx(&Potential1D::double_well(1.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(dw.fx_at(0.0).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn fx_shifted_gaussian() {
        // V = x → F_X(x) = Φ(x + 1)
        let p = Potential1D::from_poly(vec![0.0, 1.0], 1.0, Some((1.0, 0.0))).unwrap();
        let emb = distribution_fx(&p).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
            assert_abs_diff_eq!(emb.fx_at(x).unwrap(), norm_cdf(x + 1.0), epsilon = 1e-8);
        }
    }

    #[test]
    fn fx_inverse_round_trip() {
        let emb = distribution_fx(&Potential1D::double_well(5.0, 2.0).unwrap()).unwrap();
        for &x in &[-1.0, -0.4, 0.0, 0.3, 0.9] {
            let xi = emb.fx_at(x).unwrap();
            let (y, clamped) = emb.fx_inv(xi).unwrap();
            assert!(!clamped);
            assert_abs_diff_eq!(y, x, epsilon = 1e-8);
        }
    }

    #[test]
    fn bass_g_flat_and_shifted() {
        // V ≡ 0 → g(x) = x
        let g = bass_g(&distribution_fx(&flat()).unwrap()).unwrap();
        for (x, (gv, gp)) in g.xs.iter().zip(g.g.iter().zip(&g.g_prime)) {
            assert_abs_diff_eq!(*gv, *x, epsilon = 1e-8);
            assert_abs_diff_eq!(*gp, 1.0, epsilon = 1e-8);
        }
        // V = x → g(x) = x − 1, g' ≡ 1
        let p = Potential1D::from_poly(vec![0.0, 1.0], 1.0, Some((1.0, 0.0))).unwrap();
        let g = bass_g(&distribution_fx(&p).unwrap()).unwrap();
        for (x, (gv, gp)) in g.xs.iter().zip(g.g.iter().zip(&g.g_prime)) {
            assert_abs_diff_eq!(*gv, x - 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(*gp, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn certified_double_well_has_contractive_transport() {
        let p = Potential1D::double_well(5.0, 2.0).unwrap();
        let g = bass_g(&distribution_fx(&p).unwrap()).unwrap();
        assert!(
            g.max_g_prime <= 1.0 + 1e-6,
            "max g' = {} should be ≤ σ",
            g.max_g_prime
        );
    }

    #[test]
    fn capital_g_flat_is_zero_and_double_well_nonnegative() {
        let emb = distribution_fx(&flat()).unwrap();
        let rep = capital_g_check(&emb, &default_xi_grid()).unwrap();
        assert!(rep.min_value.abs() <= 1e-10, "min G = {}", rep.min_value);
        assert!(rep.boundary_decay_ok);

        let emb = distribution_fx(&Potential1D::double_well(5.0, 2.0).unwrap()).unwrap();
        let rep = capital_g_check(&emb, &default_xi_grid()).unwrap();
        assert!(rep.nonnegative, "min G = {}", rep.min_value);
        assert!(rep.boundary_decay_ok);
    }

    #[test]
    fn uncertified_widening_potential_flags_negative_g() {
        // V = -0.45x² (tilted variance 10 > 1): g' > σ somewhere,
        // so min G < 0 and the report flags it
        let p = Potential1D::from_poly(vec![0.0, 0.0, -0.45], 1.0, None)
            .unwrap()
            .with_truncation(40.0)
            .unwrap();
        let emb = distribution_fx(&p).unwrap();
        let rep = capital_g_check(&emb, &default_xi_grid()).unwrap();
        assert!(rep.min_value < 0.0, "min G = {}", rep.min_value);
        assert!(!rep.nonnegative);
    }

    #[test]
    fn moment_check_flat_square_is_equality() {
        let rep = moment_inequality_check(&flat(), &[PsiFn::square()]).unwrap();
        assert!(rep.certified);
        let row = &rep.rows[0];
        assert_abs_diff_eq!(row.lhs, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(row.rhs, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn moment_check_certified_double_well() {
        let p = Potential1D::double_well(5.0, 2.0).unwrap();
        let rep = moment_inequality_check(
            &p,
            &[PsiFn::square(), PsiFn::abs_cubed(), PsiFn::fourth()],
        )
        .unwrap();
        assert!(rep.certified);
        assert!(rep.all_hold, "{rep:?}");
        assert!(rep.var_x <= 1.0);
        assert_abs_diff_eq!(rep.var_x, 0.101_253_035_244_001_12, epsilon = 1e-9);
        assert!(rep.tail_budget < 1e-10);
    }

    #[test]
    fn moment_check_gaussian_quartic_hand_value() {
        // V = x²/2 → X ~ N(0, ½): E[(X−EX)⁴] = 3·(½)² = ¾ ≤ E[Y⁴] = 3
        let p = Potential1D::from_poly(vec![0.0, 0.0, 0.5], 1.0, Some((0.0, 0.0))).unwrap();
        let rep = moment_inequality_check(&p, &[PsiFn::fourth()]).unwrap();
        assert!(rep.certified); // convex: empty region certifies trivially
        let row = &rep.rows[0];
        assert_abs_diff_eq!(row.lhs, 0.75, epsilon = 1e-8);
        assert_abs_diff_eq!(row.rhs, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn bass_variance_sanity_for_certified_potential() {
        // Var(X) computed through the transport representation ≤ σ²
        let p = Potential1D::double_well(5.0, 2.0).unwrap();
        let emb = distribution_fx(&p).unwrap();
        let mean = adaptive_gk(
            &|x: f64| emb.fx_inv(norm_cdf(x)).map(|v| v.0).unwrap_or(0.0) * phi(x),
            -6.5,
            6.5,
            1e-11,
            1e-11,
        )
        .unwrap();
        let second = adaptive_gk(
            &|x: f64| {
                let g = emb.fx_inv(norm_cdf(x)).map(|v| v.0).unwrap_or(0.0);
                g * g * phi(x)
            },
            -6.5,
            6.5,
            1e-11,
            1e-11,
        )
        .unwrap();
        let var = second - mean * mean;
        assert!(var <= 1.0 + 1e-6, "Var via transport = {var}");
        assert_abs_diff_eq!(var, 0.101_253_035_244_001_12, epsilon = 1e-5);
    }

    #[test]
    fn floor_violation_is_rejected() {
        // declare a floor that V = -x² violates
        let r = Potential1D::from_poly(vec![0.0, 0.0, -1.0], 1.0, Some((0.0, 0.0)));
        assert!(r.is_err());
    }

    #[test]
    fn callable_derivative_mismatch_is_rejected() {
        let r = Potential1D::from_callables(
            |x| x * x,
            |x| x, // wrong: should be 2x
            |_| 2.0,
            1.0,
            Some((0.0, -1.0)),
        );
        assert!(r.is_err());
    }
}
