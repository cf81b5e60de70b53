//! Small dense linear algebra over complex Hermitian matrices, plus the
//! principal branch of the Lambert W function.
//!
//! Everything here is sized for antenna arrays of a handful of elements, so
//! the routines favour robustness over asymptotic speed.

mod dense;
mod eig;
mod lambert;
mod matrix;

pub use dense::{solve_spd, symmetric_jacobi, SymmetricEigen};
pub use eig::{hermitian_eig, is_psd, min_eigpair, HermitianEigen};
pub use lambert::{lambert_w0, w0_branch_offset};
pub use matrix::{outer, ComplexVector, HermitianMatrix};

pub use num_complex::Complex64;
