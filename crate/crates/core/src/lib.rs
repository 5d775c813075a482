//! Computational laboratory for dyadic harmonic analysis on the unit torus.
//!
//! Functions are piecewise constant on a periodic dyadic grid of `2^(n L)`
//! cells (`n` in {1, 2}), so every integral, average and supremum over dyadic
//! cubes is a finite sum. On top of that carrier the crate provides
//!
//! * dyadic lattices (including the `3^n` one-third shifted lattices), sparse
//!   families built by stopping time, and Carleson sums ([`dyadic`]);
//! * distribution functions and decreasing rearrangements ([`sample`]);
//! * Muckenhoupt, Fujii–Wilson and BMO constants ([`weights`]);
//! * Young functions, Luxemburg norms and dilation indices ([`young`]);
//! * rearrangement-invariant norms and Boyd indices ([`rispaces`]);
//! * the maximal and sparse operators ([`maximal`], [`sparse`]);
//! * periodic multilinear multipliers, pseudo-differential operators and a
//!   multilinear square function ([`pdo`]);
//! * an experiment harness that evaluates both sides of weighted and modular
//!   inequalities over a seeded corpus ([`verify`]).

pub mod dyadic;
pub mod error;
pub mod maximal;
pub mod pdo;
pub mod rispaces;
pub mod sample;
pub mod sparse;
pub mod verify;
pub mod weights;
pub mod young;

pub use dyadic::{shifted_lattices, DyadicCube, DyadicLattice, SparseFamily, SparsityReport};
pub use error::{LabError, Result};
pub use rispaces::{SpaceKind, SpaceSpec};
pub use sample::{GridFunction, RearrangementProfile};
pub use weights::{BmoFunction, Weight};
pub use young::{YoungFunction, YoungKind};
