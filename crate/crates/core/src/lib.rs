//! Simulator for error-corrected SNAP gates on a binomial-encoded cavity
//! qubit driven through a multilevel transmon ancilla.

pub mod analysis;
pub mod codes;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod protocol;
pub mod rng;
pub mod units;

pub use error::{Checked, Diagnostic, Error, Result};
