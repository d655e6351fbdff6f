pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod loss;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
