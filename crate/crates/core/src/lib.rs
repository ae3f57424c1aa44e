//! Multi-objective neuroevolution of LSTM forecasters.
//!
//! Each candidate model is a genome holding a binary feature mask and the flat
//! weight vector of a single-layer LSTM. NSGA-II minimises the model's RMSE on
//! several consecutive slices of the training data at once; the resulting
//! nondominated models are stacked under a random-forest meta-regressor and
//! evaluated with recursive multi-step forecasts.
//!
//! Module map:
//!
//! - [`lstm`]: genome decoding, masked forward pass and RMSE objectives
//! - [`moea`]: NSGA-II, variation operators and exact hypervolume
//! - [`data`]: CSV ingest, interpolation, windowing, normalization, partitions
//! - [`ensemble`]: stacking dataset, random forest, feature importance
//! - [`forecast`]: recursive forecasting, error metrics, Diebold-Mariano test
//! - [`pipeline`]: run configuration, end-to-end runs and artifacts

pub mod data;
pub mod ensemble;
pub mod error;
pub mod forecast;
pub mod lstm;
pub mod moea;
pub mod pipeline;

pub use error::{Error, Result};
