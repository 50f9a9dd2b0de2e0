//! Zero-shot human activity recognition from IMU windows, with skeleton
//! movement explanations and alignment/realism metrics.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;

pub use error::{Error, Result};
