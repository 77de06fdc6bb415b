pub mod correction;
pub mod error;
pub mod experiment;
pub mod hjb;
pub mod model;
pub mod quoting;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
