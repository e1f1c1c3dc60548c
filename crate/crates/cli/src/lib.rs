//! Batch pipeline over tree manifests: segmentation, classifier training,
//! yellowness indices, validation against ground truth and field statistics.

pub mod commands;
pub mod config;
pub mod tables;

pub use commands::{exit_code, Outcome};
pub use config::{Method, RunConfig};
