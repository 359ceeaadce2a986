//! Central-path eigenvalue diagnostics for spectrahedra.
//!
//! A spectrahedron `F = {X ⪰ 0 : A(X) = b}` whose Slater condition fails can
//! look solved (tiny residual) while the computed point is far from `F`. This
//! crate follows the perturbed log-det central path, reads the convergence
//! rates of the eigenvalues along it, and turns them into an upper bound on the
//! maximum rank, a lower bound on the forward error and a lower bound on the
//! singularity degree. Facial reduction and certified instance generators are
//! included so every bound can be checked against ground truth.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod bench;
pub mod dense;
pub mod diagnose;
mod error;
pub mod experiment;
pub mod facialred;
pub mod pathfollow;
pub mod scalar;
pub mod spectra;
pub mod symcore;

pub use error::{Error, Result};
pub use scalar::{Dd, Scalar};
pub use symcore::{SymMatrix, Spectrum};
