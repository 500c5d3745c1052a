//! Quantum source compression toolkit.

pub mod config;
pub mod error;
pub mod linalg;
pub mod qcore;
pub mod renyi;
pub mod stiefel;

pub use config::Tolerances;
pub use error::{Error, Result};
