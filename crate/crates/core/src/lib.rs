pub mod alphabet;
pub mod api;
pub mod config;
pub mod error;
pub mod eval;
pub mod extract;
pub mod ink;
pub mod model;
pub mod pipeline;
#[cfg(feature = "service")]
pub mod service;
pub mod srt;
pub mod synth;
pub mod tree_build;

pub use error::{Error, Result};
