//! Differentially private release of process-mining event logs.

pub mod anonymizer;
pub mod calibration;
pub mod dafsa;
pub mod error;
pub mod exec;
pub mod log_io;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;

pub use calibration::Mode;
pub use error::{Error, Result};
pub use exec::Execution;
pub use pipeline::{anonymize, inspect, PrivacyReport, RunParams};
