pub mod cascade;
pub mod cli;
pub mod error;
pub mod features;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod regression;
pub mod synth;
pub mod transductive;

pub use error::{Error, Result};
