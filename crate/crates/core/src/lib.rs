//! Simulation library for pinching-antenna downlink systems: closed-form
//! ergodic rates, multi-antenna placement on a dielectric waveguide, NOMA,
//! and two-user MISO beamforming.

pub mod array;
pub mod config;
pub mod error;
pub mod figures;
pub mod harness;
pub mod miso;
pub mod oracle;
pub mod params;
pub mod single;
pub mod table;
pub mod validate;

pub use error::{Error, Result};
