pub mod decomposition;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rl;
pub mod theory;

pub use error::{Error, Result};
