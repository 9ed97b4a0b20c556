//! Weakly-supervised audio-visual event localization toolkit.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod numkit;
pub mod pipeline;
pub mod refine;
mod textio;

pub use error::{Error, Result};
