//! Subsequence pattern densities in binary sequences.
//!
//! Exact counting of scattered occurrences, the algebraic relations between
//! counts, limit measures on `[0, 1]`, feasibility constants `C_tau`,
//! maximum-entropy limit shapes, Metropolis sampling and deck optimization.

pub mod config;
pub mod decimal;
pub mod deckopt;
pub mod error;
pub mod feasibility;
pub mod heisenberg;
pub mod limitshape;
pub mod measures;
pub mod oracle;
pub mod patterns;
pub mod quad;
pub mod sampler;
pub mod verify;
pub mod word;

pub use error::{Error, Result};
pub use measures::{Atom, Cell, StepMeasure};
pub use word::BinaryWord;
