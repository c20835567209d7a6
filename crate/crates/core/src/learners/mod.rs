//! Supervised per-link models: feature construction, multiple regression,
//! and a small feed-forward network.

pub mod features;
pub mod nn;
pub mod regression;

pub use features::{build_design_matrix, encode, feature_names, FeatureRow, FEATURE_WIDTH, LAGS};
pub use nn::{fit_nn, load_nn, nn_gradient, nn_loss, predict_nn, save_nn, NeuralNetModel, NnHyperparams};
pub use regression::{
    fit_regression, load_regression, predict_regression, predict_regression_raw, save_regression,
    RegressionModel,
};
