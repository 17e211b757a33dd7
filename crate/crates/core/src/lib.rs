//! Block-maxima inference for extremes of stationary time series.

pub mod bayes;
pub mod blocks;
pub mod error;
pub mod freq;
pub mod gev;
pub mod harness;
pub mod interval;
pub mod quad;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use gev::GevParams;
pub use interval::Interval;
