//! Experiment orchestration, file formats and the command-line front end for
//! slab coarsening simulations.

pub mod checkpoint;
pub mod config;
mod error;
pub mod experiment;
pub mod files;
pub mod oracle_report;
pub mod provenance;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
