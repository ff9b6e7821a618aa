//! Numerical laboratory for the free Schrödinger equation seen as a fluid:
//! Madelung couples, Nelson diffusions, quantum and classical action
//! functionals, competitor couples with fixed endpoint densities, and the
//! one-dimensional optimal transport comparison.
//!
//! All operations work in one spatial dimension on a periodic truncation
//! of the real line (see [`grid::GridSpec`]), in units `ħ = m = 1`.

pub mod action_functionals;
pub mod benamou_brenier;
pub mod competitors;
pub mod error;
pub mod grid;
pub mod io;
pub mod madelung;
pub mod nelson_sde;
pub mod schrodinger;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use grid::{GridSpec, ScalarField, VectorField};
pub use madelung::{DriftField, FluidCouple, Provenance};
pub use schrodinger::{GaussianPacketSpec, WaveField};
