//! Floquet lattice simulator for single particles and interacting
//! two-boson doublons under a four-step anomalous hopping drive.

pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod lattice;
pub mod linalg;
pub mod singleparticle;
pub mod stability;
pub mod twoparticle;
pub mod validate;

pub use error::{Error, Result};
