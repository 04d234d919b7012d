//! Numerical toolkit for consistent sets of histories.
//!
//! The crate evaluates decoherence functionals for finite-dimensional quantum
//! systems and for finite classical probability theories, builds coherent-state
//! quasiprojectors over phase-space cells, and searches for consistent sets
//! ("windows") and for pairs of sets that license contrary inferences.
//!
//! Module map:
//!
//! * [`linalg`]: dense complex matrices, projectors, states, unitaries.
//! * [`history`]: time grids, history sets, class operators, coarse graining.
//! * [`decoherence`]: the quantum decoherence functional and consistency checks.
//! * [`classical`]: sample spaces, bistochastic maps, ε-determinism.
//! * [`phase_space`]: truncated Fock space, coherent states, phase cells.
//! * [`window`]: trivial windows, annealed search, classicality, contrary inference.
//! * [`scenario`] and [`cli`]: the batch front end behind the `histkit` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod cli;
pub mod decoherence;
pub mod history;
pub mod io;
pub mod linalg;
pub mod phase_space;
pub mod random;
pub mod scenario;
pub mod window;

pub use decoherence::{
    check_consistency, decoherence_matrix, probabilities, ConsistencyReport, DecoherenceMatrix, Verdict,
};
pub use history::{HistorySet, QuantumDynamics, TimeGrid};
pub use linalg::{ComplexMatrix, DensityMatrix, Projector, Unitary, C64};
