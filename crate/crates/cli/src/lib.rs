//! Command-line pipelines built on the `colorclass` library: bin-size
//! analysis, corpus histograms, class-set optimization, batch weights,
//! segment harmonization, class-space evaluation and quantization round trips.

pub mod cli;
pub mod commands;
pub mod config;
pub mod formats;
pub mod resize;
pub mod synth;

pub use cli::main_with_args;
pub use config::PipelineConfig;
