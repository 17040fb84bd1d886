//! Pixelated patch antenna synthesis.
//!
//! Patches are binary pixel grids ([`grid`]); a pair of them is voxelized
//! over a grounded substrate and simulated with a Yee-lattice field solver
//! ([`emcore`]); port waveforms become two-port S-parameters ([`sparam`]);
//! a binary particle swarm ([`optim`]) searches pixel patterns for match at
//! the design frequency and isolation between the elements. [`bench`] holds
//! the closed-form rectangular patch used as baseline and solver check.

pub mod bench;
pub mod consts;
pub mod emcore;
pub mod error;
pub mod grid;
pub mod optim;
pub mod sparam;

pub use error::{Error, Result};
pub use grid::{random_grid, Cell, PixelGrid};
