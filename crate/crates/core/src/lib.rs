//! Spectral gaps of the two-dimensional Dirac operator with a periodic
//! mass insertion β·χ(x/α)σ₃.
//!
//! The crate builds plane-wave truncations of the Bloch fibers h_k(α, β),
//! diagonalizes them with a dense reference solver or a matrix-free
//! folded-spectrum LOBPCG, scans the Brillouin zone for the gap, and
//! evaluates the Schur-complement (Feshbach) diagnostics around the
//! zero Fourier mode.

pub mod bessel;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod feshbach;
pub(crate) mod fft2;
pub mod fiber;
pub mod linalg;
pub mod pauli;
pub mod gapscan;
pub mod potential;

pub use error::{Error, Result};
