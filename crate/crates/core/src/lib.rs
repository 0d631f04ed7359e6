//! Random-loop simulation and verification for singlet-projector spin chains.
//!
//! The spin-S chain with Hamiltonian `H = -sum_x P0_{x,x+1}` (the negative
//! singlet projector on each bond) admits a classical representation: bar
//! configurations on the space-time lattice, weighted by
//! `(1/n)^|w| * q^(L(w) - |w|)` with `q = 2S + 1` and `L` the number of
//! loops. This crate implements that representation end to end:
//!
//! - [`chain`]: geometry, time grid, configurations and their validation;
//! - [`loops`]: loop decomposition, loop counts, connectivity queries;
//! - [`enumerate`]: exact sums over all configurations at desk scale;
//! - [`ed`]: dense exact diagonalization of the quantum chain (the
//!   independent oracle for partition functions and correlations);
//! - [`sampler`]: Metropolis insert/delete Monte Carlo with binned errors;
//! - [`contours`]: long-loop classification, Jordan interiors, dimer
//!   windows, and contour geometry;
//! - [`bounds`]: closed-form contour-sum bounds, the dimerization
//!   threshold in S, and correlation-decay rates;
//! - [`verify`]: the cross-module check battery used by the CLI and the
//!   acceptance suite.

pub mod bounds;
pub mod chain;
pub mod contours;
pub mod ed;
pub mod enumerate;
pub mod error;
pub mod loops;
pub mod sampler;
pub mod stats;
pub mod verify;

pub use chain::{Bar, BarConfiguration, ChainGeometry, EdgeClass, SpinWeight, TimeGrid};
pub use error::{Error, Result};
pub use loops::{Loop, LoopSet};
