//! Hybrid dynamical maps: semi-Markov (memory-kernel) dissipation of level
//! populations combined with Markovian pure decoherence.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats and the command-line front end live
//! in the `hybridmap` crate.
//!
//! Conventions used throughout:
//!
//! * probability vectors are columns and stochastic matrices are
//!   column-stochastic, so `T[(i, j)]` is the probability of being in `i` at
//!   time `t` after starting in `j`;
//! * `q_ij(t)` is the density of a jump from `j` to `i`;
//! * convolution is causal, `(f * g)(t) = ∫₀ᵗ f(t - τ) g(τ) dτ`, and a delta
//!   part of weight `w` contributes `w · g(t)`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cp_restore;
mod error;
pub mod hybrid_map;
pub(crate) mod math;
pub mod numkit;
pub mod qubit_ref;
pub mod sampler;
pub mod semi_markov;
pub mod volterra;

pub use error::{Error, Result};
pub use numkit::{CMatrix, HermitianMatrix, Matrix, RMatrix, TimeGrid};
pub use num_complex::Complex64;
