//! Numerical differential geometry of hypersurfaces in S²×S².
//!
//! The ambient space is the Riemannian product of two unit 2-spheres,
//! carrying the product structure `P(X1,X2) = (X1,-X2)` and the two complex
//! structures `J1 = (J,J)`, `J2 = (J,-J)`. The crate builds explicit
//! hypersurface families as parametrized immersions, extracts the adapted
//! frame and shape operator by finite differences, verifies the structural
//! identities (Gauss, Codazzi, the cyclic second-derivative identity) against
//! independent oracles, solves the sinh-Gordon equation
//! `Δh = -(1/√2) sinh(√2 h)` for the minimal-hypersurface correspondence, and
//! implements the Jacobi-field machinery of parallel hypersurfaces.

pub mod ambient;
pub mod error;
pub mod frames;
pub mod immersions;
pub mod parallel;
pub mod report;
pub mod sinhgordon;
pub mod verify;

pub use error::GeomError;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GeomError>;
