//! Traffic state estimation toolkit for an urban intersection area:
//! synthetic ground-truth generation, heterogeneous sensor emulation,
//! interval series derivation, agreement metrics, and a regression-based
//! travel-time estimator.

pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod mlr;
pub mod pipeline;
pub mod runner;
pub mod sensors;
pub mod series;
pub mod simnet;
pub mod types;

pub use error::{Error, Result};
pub use grid::IntervalGrid;
pub use series::{SampledSeries, Unit};
