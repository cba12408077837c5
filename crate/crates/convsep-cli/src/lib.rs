//! Harness around the convsep library: WAV ingestion, 0 dB mixture
//! construction, model persistence, experiment orchestration, and CSV/JSON
//! result emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod mix;
pub mod model_io;
pub mod results;
pub mod wav;

pub use error::{CliError, Result};
