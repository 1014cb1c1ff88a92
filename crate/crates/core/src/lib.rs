//! Quantum energy teleportation across a three-spin open Ising chain.
//!
//! The chain Hamiltonian is `H = κ(σ₁ˣσ₂ˣ + σ₂ˣσ₃ˣ) + σ₁ᶻ + λσ₂ᶻ + σ₃ᶻ`, held in a
//! Gibbs state. Alice measures qubit 1, announces the outcome, and Bob rotates
//! qubit 3 conditioned on it. The crate evaluates the energies involved both by
//! dense matrix arithmetic and by closed forms built from thermal functionals,
//! along with edge-spin correlation measures and a general-measurement
//! certificate that no energy can be teleported when `λ = 0`.

pub mod linalg;
pub mod model;
pub mod optimize;
pub mod protocol;
pub mod correlations;
pub mod genmeas;
pub mod sweep;
pub mod audit;

pub use linalg::{ComplexMatrix, SpectralDecomposition, C64};
