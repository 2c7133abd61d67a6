//! File formats, synthetic data and command pipelines for the `khist` tool.

pub mod error;
pub mod format;
pub mod generate;
pub mod pipeline;
