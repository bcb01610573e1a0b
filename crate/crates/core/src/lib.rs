pub mod amino;
pub mod cli;
pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
