//! Completely positive semigroups: generators, dilations and weak-coupling limits.

pub mod classical;
pub mod cpmap;
pub mod dilation_toy;
pub mod friedrichs_wcl;
pub mod invariance_dbc;
pub mod langevin_fock;
pub mod lindblad;
pub mod matrixcore;
pub mod pauli_fierz;
pub mod random;

pub use matrixcore::{ComplexMatrix, MatrixError, Superoperator, C64};
