//! Evaluable path functionals with integrability metadata.
//!
//! A [`Functional`] maps a sampled path to a real. Returning `-∞` is the
//! rejection convention: such paths contribute `e^{-∞} = 0` to
//! log-partition means and abort drift objectives with diagnostics. `NaN`
//! or `+∞` outputs are always evaluation errors.

use crate::error::{Error, Result};
use crate::wiener::{TimeGrid, WienerPath};
use std::fmt;
use std::sync::Arc;

type EvalFn = Arc<dyn Fn(&WienerPath) -> f64 + Send + Sync>;

/// Smooth cylinder function `f(x₁, …, x_m)` with a gradient oracle, the
/// ingredient of the explicit optimal-drift formula.
pub trait CylinderFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], k: usize) -> f64;
}

/// Polynomial in one coordinate, `f(x) = Σ c_i x^i`: the serializable
/// cylinder shape used by configs (m = 1).
pub struct Poly1(pub Vec<f64>);

impl CylinderFn for Poly1 {
    fn value(&self, x: &[f64]) -> f64 {
        horner(&self.0, x[0])
    }
    fn grad(&self, x: &[f64], k: usize) -> f64 {
        assert_eq!(k, 0);
        let d: Vec<f64> = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        horner(&d, x[0])
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Metadata for the cylinder kind: knot times plus the smooth function.
pub struct CylinderSpec {
    pub times: Vec<f64>,
    pub f: Arc<dyn CylinderFn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LinearTerminal,
    QuadraticTerminal,
    Cylinder,
    PotentialTerminal,
    Custom,
}

/// An evaluable path functional `F` with declared integrability metadata:
/// `delta` is the negative-part moment exponent, `upper_bound` an a.s.
/// upper bound when one exists.
pub struct Functional {
    pub name: String,
    pub kind: Kind,
    pub delta: Option<f64>,
    pub upper_bound: Option<f64>,
    eval: EvalFn,
    cylinder: Option<CylinderSpec>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("delta", &self.delta)
            .field("upper_bound", &self.upper_bound)
            .finish()
    }
}

impl Functional {
    /// `F(w) = c · w(1)₀` (first coordinate of the terminal value).
    pub fn linear_terminal(c: f64) -> Functional {
        Functional {
            name: format!("{c}*w(1)"),
            kind: Kind::LinearTerminal,
            delta: Some(1.0),
            upper_bound: None,
            eval: Arc::new(move |w| c * w.terminal()[0]),
            cylinder: None,
        }
    }

    /// `F(w) = a · |w(1)|²`.
    pub fn quadratic_terminal(a: f64) -> Functional {
        Functional {
            name: format!("{a}*|w(1)|^2"),
            kind: Kind::QuadraticTerminal,
            delta: Some(1.0),
            upper_bound: if a <= 0.0 { Some(0.0) } else { None },
            eval: Arc::new(move |w| {
                a * w.terminal().iter().map(|x| x * x).sum::<f64>()
            }),
            cylinder: None,
        }
    }

    /// `F(w) = -V(w(1)₀)` for a polynomial `V` given by coefficients.
    pub fn potential_terminal(coeffs: Vec<f64>) -> Functional {
        let c = coeffs.clone();
        Functional {
            name: "-V(w(1))".to_string(),
            kind: Kind::PotentialTerminal,
            delta: Some(1.0),
            upper_bound: None,
            eval: Arc::new(move |w| -horner(&c, w.terminal()[0])),
            cylinder: None,
        }
    }

    /// Cylinder functional `F(w) = f(w(t₁), …, w(t_m))`, `d = 1`.
    pub fn cylinder(times: Vec<f64>, f: Arc<dyn CylinderFn>) -> Functional {
        let spec_times = times.clone();
        let ff = f.clone();
        Functional {
            name: format!("cylinder at {times:?}"),
            kind: Kind::Cylinder,
            delta: Some(1.0),
            upper_bound: None,
            eval: Arc::new(move |w| {
                let xs: Vec<f64> = spec_times
                    .iter()
                    .map(|&t| w.value_at_time(t).map(|v| v[0]).unwrap_or(f64::NAN))
                    .collect();
                if xs.iter().any(|x| x.is_nan()) {
                    f64::NAN
                } else {
                    ff.value(&xs)
                }
            }),
            cylinder: Some(CylinderSpec { times, f }),
        }
    }

    /// Arbitrary functional from a closure.
    pub fn custom<F>(name: &str, f: F) -> Functional
    where
        F: Fn(&WienerPath) -> f64 + Send + Sync + 'static,
    {
        Functional {
            name: name.to_string(),
            kind: Kind::Custom,
            delta: None,
            upper_bound: None,
            eval: Arc::new(f),
            cylinder: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Functional {
        self.delta = Some(delta);
        self
    }

    pub fn with_upper_bound(mut self, m: f64) -> Functional {
        self.upper_bound = Some(m);
        self
    }

    /// Evaluate on a path. `-∞` means rejection.
    pub fn eval(&self, w: &WienerPath) -> f64 {
        (self.eval)(w)
    }

    pub fn cylinder_spec(&self) -> Option<&CylinderSpec> {
        self.cylinder.as_ref()
    }

    /// Check grid compatibility (cylinder knots must be grid knots).
    pub fn validate_grid(&self, grid: &TimeGrid) -> Result<()> {
        if let Some(spec) = &self.cylinder {
            for &t in &spec.times {
                if grid.knot_index(t).is_none() {
                    return Err(Error::config(format!(
                        "cylinder time {t} is not a knot of the evaluation grid"
                    )));
                }
            }
        }
        Ok(())
    }
}
