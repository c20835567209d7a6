//! Traffic-speed forecasting benchmark: a road-network trajectory simulator
//! with SARIMA-generated ground truth, the exponential-smoothing family
//! (nine seasonality/trend variants plus an adaptive-parameter smoother),
//! per-link regression and neural-network learners, and an RMSE evaluation
//! protocol with exhaustive parameter grids.

pub mod adaptive;
pub mod config;
pub mod error;
pub mod eval;
pub mod learners;
pub mod model;
pub mod network;
pub mod plot;
pub mod rng;
pub mod sarima;
pub mod series;
pub mod sim;
pub mod smoothing;

pub use error::{Error, Result};
