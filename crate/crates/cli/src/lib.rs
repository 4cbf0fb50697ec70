//! Experiment driver for latent-space enhancement of Hankelised time series:
//! run configuration, the end-to-end pipeline, and SVG rendering.

pub mod config;
pub mod pipeline;
pub mod svg;

pub use config::{Enhancement, InputSource, RunConfig};
pub use pipeline::{reproduce_paper, run_experiment, RunReport};
