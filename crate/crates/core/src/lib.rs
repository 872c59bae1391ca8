//! System-level simulator and planner for SSB beams serving UAVs on an aerial
//! highway over a three-sector massive-MIMO macro network.
//!
//! The pipeline is:
//!
//! 1. [`scenario`] builds the hexagonal deployment, the highway and the users.
//! 2. [`channel`] produces large-scale gains and Rician channel vectors.
//! 3. [`codebook`] builds the column-switched SSB codebook and the data codebook.
//! 4. [`mama`] scores every (segment, sector) pair and designates serving cells.
//! 5. [`ega`] searches one replacement SSB beam and power per designated cell.
//! 6. [`association`] and [`evaluation`] compute coverage SINR, data SINR and rates.
//!
//! [`pipeline`] ties these together and [`cli`] exposes them on the command line.

pub mod association;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod config;
pub mod ega;
pub mod error;
pub mod evaluation;
pub mod mama;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Cartesian point or direction in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
