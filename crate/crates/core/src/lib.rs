//! Projected ensembles of the kicked-Ising chain and their emergent state
//! designs: exact enumeration, the dual-unitary circuit picture, transfer-map
//! spectra and a periodic-boundary Monte-Carlo estimator.

pub mod angle;
pub mod dual;
pub mod ensembles;
pub mod error;
pub mod kicked_ising;
pub mod linalg;
mod par;
pub mod pbc;
pub mod scan;
pub mod structure;
pub mod symmetric;
pub mod transfer;
pub mod verify;

pub use angle::Angle;
pub use error::{Error, Result};
pub use linalg::{ComplexOperator, StateVector, C64};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
