//! Monte Carlo realization of the variational representation
//! `log E[exp F(W)] = sup_v E[F(W + ∫v ds) − ½∫|v|²ds]` on discretized
//! Wiener space, together with the machinery the representation rests on
//! and two of its consequences.
//!
//! The crate is organized around one discretization convention: paths live
//! on a fixed time grid over `[0, 1]`, drifts are piecewise constant on
//! grid intervals with adapted feedback evaluated at the left knot, and all
//! stochastic integrals are left-point Itô sums. Under that convention the
//! continuous-time identities (Girsanov reweighting, Doléans martingale
//! property, the conjugate-drift round trips, the duality equality at the
//! Clark–Ocone drift) hold *exactly* on the grid, so they are testable to
//! machine precision rather than only in a refinement limit.
//!
//! Modules:
//!
//! - [`wiener`]: time grids, path sampling, Cameron–Martin arithmetic,
//!   drift transforms `T^v`, Doléans exponentials, Girsanov reweighting.
//! - [`drift`]: the simple-process class (piecewise-constant adapted
//!   feedback drifts), parametric drift families for optimization, and the
//!   two conjugate constructions `ṽ` and `v̄`.
//! - [`functional`]: evaluable path functionals with integrability
//!   metadata.
//! - [`variational`]: both sides of the representation, truncation sweeps,
//!   assumption validators, lower-bound and entropy checks.
//! - [`spsa`]: simultaneous-perturbation stochastic approximation over
//!   drift families (the numerical `sup` over the drift class).
//! - [`clark_ocone`]: the explicit optimal drift for cylinder functionals,
//!   computed by Gauss–Hermite conditioning.
//! - [`prekopa`]: midpoint log-concavity scanning of `λ ↦ log E[e^{G(W,λ)}]`,
//!   the joint-concavity hypothesis check, and the Wiener-space
//!   Brascamp–Lieb inequality via self-normalized importance sampling.
//! - [`blcert`]: the one-dimensional Brascamp–Lieb certifier for nonconvex
//!   potentials: partition function, `U_V` / nonconvexity region, Bass
//!   embedding `g = F_X⁻¹ ∘ Φ`, and convex-moment comparisons, all by
//!   deterministic quadrature.
//!
//! Determinism contract: every Monte Carlo quantity is a pure function of
//! `(seed, n_paths, config)`. Per-path randomness comes from independent
//! counter-indexed ChaCha streams and reductions use a fixed pairwise tree,
//! so results are bitwise identical at any thread count.

pub mod blcert;
pub mod clark_ocone;
pub mod drift;
pub mod error;
pub mod estimate;
pub mod functional;
pub mod prekopa;
pub mod quad;
pub mod spsa;
pub mod variational;
pub mod wiener;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use functional::Functional;
pub use wiener::{CameronMartinPath, TimeGrid, WienerPath};
