//! Numerical laboratory for a parabolic Monge-Ampère-type flow on flat
//! complex tori.
//!
//! The flow evolves a potential `u` on the torus `T^{2n} ≅ ℂⁿ` by
//!
//! ```text
//!     ∂u/∂t = ln( χ_u^n / (χ_u^{n-α} ∧ ω^α) ) − ln ψ,      u(·,0) = 0,
//! ```
//!
//! where `χ_u = χ + (√-1/2)∂∂̄u` must stay positive (admissibility). The
//! crate provides the spectral calculus on periodic grids ([`spectral`]),
//! the pointwise Hermitian-form algebra behind the operator ([`herm`],
//! [`linalg`], [`symfunc`]), the operator itself and its linearization
//! ([`operator`]), time integration with runtime monitors ([`flow`]), the
//! J-functional and decay diagnostics ([`functionals`]), and a
//! method-of-continuity driver that solves the elliptic equation
//! `χ_u^n = e^b ψ χ_u^{n-α} ∧ ω^α` by chaining flow runs ([`continuity`]).
//!
//! Everything is deterministic: the same scenario and seed produce
//! bit-identical diagnostics regardless of thread count.

pub mod continuity;
pub mod error;
pub mod field;
pub mod flow;
pub mod functionals;
pub mod grid;
pub mod herm;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod scenario;
pub mod snapshot;
pub mod spectral;
pub mod symfunc;
pub mod util;
pub mod verify;

pub use error::{Error, Result};

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 4;

/// A relative eigenvalue below this floor counts as leaving the cone of
/// admissible (positive) forms. Shared by admissibility and
/// positive-definiteness checks.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// Hermitian-deviation tolerance accepted when ingesting matrix data.
pub const HERMITIAN_TOL: f64 = 1e-13;
