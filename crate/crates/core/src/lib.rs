//! Breathers, spectra and long-time damped dynamics of the discrete
//! nonlinear Schrödinger lattice in its rotating frame.
#![allow(clippy::needless_range_loop)]

pub mod breather;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod lattice;
pub mod modulation;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{RealState, SystemParams};
