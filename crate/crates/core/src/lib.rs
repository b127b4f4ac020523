//! Block-encoding calculus for parameterized PDE generators, simulated classically.
//!
//! The crate builds explicit `(alpha, a, eps)` block-encodings — unitaries `U` on
//! `a` ancilla qubits plus `n` system qubits with `A ≈ alpha · (⟨0^a| ⊗ I) U (|0^a⟩ ⊗ I)` —
//! for diagonal coefficient operators, finite-difference operators, and the
//! first-/second-order PDE generators assembled from them. Diagonal coefficients are
//! loaded from truncated Fourier interpolants, and a design register can shift the
//! interpolant's argument so one circuit encodes a whole family of operators at once.
//! Time evolution is driven by a Chebyshev expansion of the propagator, and everything
//! is executed matrix-free on a deterministic state-vector engine so every metadata
//! claim can be checked against dense linear algebra at desk scale.
//!
//! Module map:
//! - [`linalg`]: dense complex matrices, Kronecker products, matrix exponentials,
//!   spectral norms, state vectors.
//! - [`statevec`]: the matrix-free action tree (`ActionNode`) and its engine.
//! - [`becalc`]: the block-encoding type and its calculus (product, linear
//!   combination, selector pairs, controls, Chebyshev iterates, verification).
//! - [`diagenc`]: Fourier fitting and diagonal block-encodings, including the
//!   design-register (parameter-shift) variant and register-value diagonals.
//! - [`pdeops`]: grids, boundary stencils, difference-operator encodings, and the
//!   PDE generator assemblies.
//! - [`hamsim`]: evolution planning (Bessel weights) and propagator application.
//! - [`design`]: the demo coefficient family, objective encoding, and landscape scans.
//! - [`costmodel`]: closed-form resource predictions and reconciliation against
//!   measured counters.

pub mod becalc;
pub mod costmodel;
pub mod design;
pub mod diagenc;
pub mod error;
pub mod hamsim;
pub mod linalg;
pub mod pdeops;
pub mod statevec;

pub use error::Error;
pub use linalg::{ComplexMatrix, StateVector, C64};

/// Default cap on dense dimensions (rows of a materialized matrix).
pub const DENSE_CAP: usize = 1 << 14;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
