//! Sequential physics-informed training of 1D evolutionary PDEs with
//! hard-constrained interval stitching through trainable influence functions.

pub mod checkpoint;
pub mod config;
pub mod diff;
pub mod error;
pub mod evaluation;
pub mod influence;
pub mod network;
pub mod oracle;
pub mod partition;
pub mod problem;
pub mod real;
pub mod trainer;

pub use error::{Error, Result};
