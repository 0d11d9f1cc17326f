//! Collision-model and master-equation dynamics of a dissipative spin ring.
//!
//! Basis convention shared by every module: `|↑⟩ = (1, 0)ᵀ` is index 0,
//! `σz|↑⟩ = |↑⟩` and `σ⁺ = |↑⟩⟨↓|`. In tensor products the system sites come
//! first (site 0 is the most significant factor) and environment qubits are
//! appended last.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blp;
pub mod collision;
pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod rng;
pub mod thermo;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, DensityMatrix, C64};
pub use model::ModelParams;
