//! Energy-distribution tails of local Hamiltonians.
//!
//! Builds small lattice and hypergraph spin models, computes exact energy
//! distributions and central moments, counts the tuple families that
//! control those moments, and checks closed-form Chernoff-type tail bounds
//! against exact diagonalization.

pub mod bounds;
pub mod combinatorics;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod spectrum;
pub mod states;

pub use error::{Error, Result};
pub use hamiltonian::{LocalHamiltonian, LocalTerm};
pub use lattice::{Geometry, InteractionHypergraph, LatticeSpec};
pub use states::{DensityState, ProductState, State};
