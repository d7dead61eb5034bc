//! Coded MapReduce driven by binary computing matrices.
//!
//! A `K x N` matrix with `r` zeros per column says which servers map which
//! subfiles. Covering its ones by disjoint identity submatrices of size `g`
//! yields a shuffle with load `2/g (1 - r/K)`: each submatrix costs one coded
//! and one uncoded transmission.

pub mod balance;
pub mod constructions;
pub mod cover;
pub mod error;
pub mod matrix;
pub mod rational;
pub mod report;
pub mod shuffle;
pub mod straggler;
pub mod transcript;

pub use error::{Error, Result};
pub use matrix::{
    count_identity_check, load_formula, validate_matrix, verify_cover, BinaryComputingMatrix,
    IdentityCover, IdentitySubmatrix,
};
pub use rational::Rational;
