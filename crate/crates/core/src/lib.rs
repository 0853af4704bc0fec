//! Numerical laboratory for Bergman projections and Hilbert-type operators
//! on mixed-norm spaces of the upper half-plane carrying log-type weights
//! `ω^k`, where `ω = 1 + ε₁ ln₊Φ(1/t) + ε₂ ln₊Φ(t)` for a growth function `Φ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`weights`]: growth functions, their class certificates and the weights.
//! * [`quadrature`]: dyadic panel integration on `(0, ∞)`, weighted interval
//!   masses, Forelli–Rudin integrals, slice norms and mixed norms.
//! * [`hilbert`]: the operator `H_β`, its weighted adjoint, the Schur test,
//!   discretised norm estimation and boundedness classification.
//! * [`bergman`]: the kernel `K_β`, the projections `P_β` and `P_β⁺`, the
//!   adjoint witness and duality pairings.
//! * [`lattice`]: the δ-lattice, Bergman distance and interval audits.
//! * [`atomic`]: sequence norms, sampling, synthesis, reconstruction and the
//!   auxiliary estimates used by the atomic decomposition.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod atomic;
pub mod bergman;
pub mod error;
pub mod hilbert;
pub mod lattice;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod weights;

pub use error::{LabError, Result};
pub use num_complex::Complex64;
