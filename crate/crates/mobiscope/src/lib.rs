//! Mobile-phone mobility pipeline: CSV ingest, home detection, grid
//! aggregation, difference-in-differences, local spatial autocorrelation,
//! neighbourhood demographics and a synthetic data generator.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, RunStats};
