//! Compile sparse Pauli Hamiltonians down to 2-local nearest-neighbour
//! Hamiltonians on a 2D grid, then certify the resulting low-energy
//! simulation numerically.
//!
//! The pipeline is a sequence of perturbation-gadget rewrites:
//!
//! 1. locality reduction (subdivision + 3-to-2 gadgets),
//! 2. degree reduction (edge subdivision + triangle gadgets),
//! 3. deterministic 2D comb layout,
//! 4. long-range localization through W-state chain gadgets,
//! 5. crossing removal.
//!
//! Each rewrite carries a (Delta, eta, epsilon) simulation certificate;
//! the `verify` module measures the guarantees by dense diagonalization at
//! desk scale.

pub mod codes;
pub mod compiler;
pub mod config;
pub mod error;
pub mod format;
pub mod gadgets;
pub mod layout;
pub mod linalg;
pub mod pauli;
pub mod verify;
pub mod wstate;

pub use error::{Error, Result};
pub use pauli::{Axis, GraphStats, Hamiltonian, PauliOp, PauliTerm};
