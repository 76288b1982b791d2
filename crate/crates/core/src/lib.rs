//! RFID mutual authentication with proof of possession.

pub mod bits;
pub mod cex;
pub mod codec;
pub mod error;
pub mod harness;
pub mod ma;
pub mod model;
pub mod pop;
pub mod primitives;
pub mod rng;
pub mod stats;

pub use bits::BitString;
pub use error::{Error, Result};
pub use rng::Rng;
