//! Weak coupling limit laboratory for Friedrichs Hamiltonians.
//!
//! A finite system with Hermitian Hamiltonian E is coupled with strength λ to a
//! reservoir that acts by multiplication with the spectral variable. The crate
//! computes the Davies generator Γ of the limiting semigroup, builds its unitary
//! dilation on the asymptotic space, and measures how discretized Hamiltonians
//! approach both as λ → 0.

// `!(x > 0.0)` rejects NaN along with nonpositive values; quadrature nodes are kept at full published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod cli;
pub mod davies;
pub mod dilation;
pub mod linalg;
pub mod model;
pub mod wcl;
