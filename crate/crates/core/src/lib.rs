//! Higher-order spectral shift functions for Hermitian matrix pairs.
//!
//! The crate computes `η_n` for a pair `(H, V)` of Hermitian matrices as an
//! explicit piecewise polynomial, together with the multiple operator
//! integrals, divided differences and Taylor remainders it is built from.

pub mod cli;
pub mod divdiff;
pub mod error;
pub mod functions;
pub mod harness;
pub mod moi;
pub mod momentum;
pub mod piecewise;
pub mod polynomial;
pub mod quadrature;
pub mod spectral;
pub mod ssf;
pub mod summation;
pub mod taylor;

pub use error::{Result, SsfError};
pub use functions::{FunctionFamily, SmoothTestFunction};
pub use piecewise::PiecewisePolynomial;
pub use spectral::{CMatrix, HermitianOperator, SpectralDecomposition};
