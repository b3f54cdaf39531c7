//! Exact symbolic engine for homogeneous Fedosov star products on
//! cotangent-bundle charts.
//!
//! Everything is computed in exact Gaussian-rational arithmetic over
//! truncated formal series: base-coordinate dependence is carried as
//! Taylor jets at the chart origin, momentum dependence as polynomials,
//! and the formal parameter λ as a truncated power series. All advertised
//! identities (nilpotency of the Fedosov derivations, associativity of the
//! star products, equivalence intertwiners, representation laws) hold as
//! equalities of exact coefficients, never up to tolerance.
//!
//! Module map:
//! - [`scalar`], [`multi`]: Gaussian rationals, sparse multi-indices and
//!   multivariate polynomials (jets).
//! - [`weyl`]: the formal graded Weyl algebra over a chart of T*Q with the
//!   pointwise, fibrewise Weyl and fibrewise standard-ordered products, the
//!   δ-calculus and the fibrewise equivalence S.
//! - [`geometry`]: Christoffel jets on Q, curvature, the homogeneous
//!   symplectic lift to T*Q, the operators ∇, B, Δ, Div_α, N and lifts.
//! - [`classical`]: the undeformed (Emmrich–Weinstein) Fedosov theory on Q.
//! - [`fedosov`]: the deformed recursion machinery, Fedosov–Taylor series
//!   and the star products ⋆_F, *′, ⋆_S.
//! - [`calculus`]: equivalence transformations T, V, the anti-automorphism
//!   C_S and the second Weyl-type product ⋆_W.
//! - [`representation`]: differential-operator representations on Q and
//!   formal adjoints.
//! - [`lie`]: the Gutt star product on T*G via the BCH series.

pub mod calculus;
pub mod classical;
pub mod error;
pub mod fedosov;
pub mod geometry;
pub mod lie;
pub mod matrix;
pub mod multi;
pub mod probe;
pub mod representation;
pub mod scalar;
pub mod tensor;
pub mod verify;
pub mod weyl;

pub use error::CoreError;
pub use scalar::Scalar;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
