//! Zero-temperature Glauber ("coarsening") dynamics on two-dimensional slabs
//! `Z² × {0, …, k−1}`, approximated laterally by a torus.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that does not
//! touch the filesystem: lattice geometry, bit-packed spin states, the two
//! event engines, cluster and fixation analysis, deterministic certificates
//! for the explicit constructions, and an exact solver for tiny systems.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod constructions;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod oracle;
pub mod pattern;
pub mod rng;
pub mod spin;
pub mod stats;

pub use error::Error;
pub use geometry::{Neighbor, SiteId, SlabGeometry, VerticalBc};
pub use pattern::Pattern;
pub use spin::{Eta, Spin, SpinConfig};

pub type Result<T> = core::result::Result<T, Error>;
