//! Dense numerical substrate: uniform time grids, small dense matrices,
//! Hermitian eigenvalues, matrix exponentials and causal convolution.

mod conv;
mod eig;
mod expm;
mod grid;
mod matrix;

pub use conv::{cumulative_trapezoid, grid_convolve, trapezoid_convolve, GridKernel};
pub use eig::{hermitian_eigenvalues, hermitian_min_eig, symmetric_eigenvalues, HermitianMatrix};
pub use expm::{expm, semigroup_exp};
pub use grid::TimeGrid;
pub use matrix::{CMatrix, Matrix, RMatrix};

pub(crate) use conv::ReversedKernel;
