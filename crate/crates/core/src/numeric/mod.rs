//! Numerical building blocks: bracketing roots, quadrature, tridiagonal
//! eigenvalues.

pub mod quad;
pub mod roots;
pub mod tridiag;
