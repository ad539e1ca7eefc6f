//! Nuclear electric resonance (NER) simulation.
//!
//! An oscillating electric field polarizes the atomic electrons, which in
//! turn produce an oscillating electric-field gradient at the nucleus. For a
//! nucleus with spin `S >= 1` that gradient couples to the quadrupole moment
//! and drives transitions between neighbouring `m` levels. This crate covers
//! the whole chain:
//!
//! - [`spinops`]: spin matrices for arbitrary `S`, qubit-subspace projections.
//! - [`hydrogenic`]: hydrogen-like energies and radial/angular integrals.
//! - [`efg`]: the gradient response coefficients `A`, `B`, `C`, `B'` and
//!   gradient tensors.
//! - [`hamiltonians`]: nuclear Hamiltonians (quadrupole, NER drive, static
//!   Stark control, two-nucleus J coupling) in angular-frequency units.
//! - [`dynamics`]: brute-force propagation, rotating frames, closed-form
//!   propagators and leakage diagnostics.
//! - [`gates`]: single-qubit pulses, CZ and CNOT schedules, gate fidelity.
//! - [`performance`]: Rabi-rate scaling and the number-of-flips figure of merit.
//! - [`runner`]: config-driven experiments behind the `ner` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod efg;
pub mod error;
pub mod gates;
pub mod hamiltonians;
pub mod hydrogenic;
pub mod linalg;
pub mod performance;
pub mod quadrature;
pub mod runner;
pub mod spinops;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub use error::{NerError, Result};
