//! Polar code lattices: Construction D over nested polar codes, designed
//! with density evolution and the equal error probability rule.

pub mod channel;
pub mod crc;
pub mod decoder;
pub mod density;
pub mod design;
pub mod error;
pub mod lattice;
pub mod polar;
pub mod sim;

pub use error::{Error, Result};
