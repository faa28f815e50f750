//! Simulation and analysis toolkit for random-field O(n) spin models on
//! hypercubic lattices.
//!
//! The Hamiltonian convention is documented in [`energy`]; the orientation
//! convention (field in the last `k` coordinates) in [`fields`].

pub mod contour;
pub mod elliptic;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod groundstate;
pub mod lattice;
pub mod renorm;
pub mod rng;
pub mod sampler;
pub mod snapshot;
pub mod stats;

pub use error::{Error, Result};

/// Version string embedded in every output file.
pub const VERSION: &str = concat!("rfo-core/", env!("CARGO_PKG_VERSION"));
