//! Shared fixtures for the benchmarks.

use chaosx_core::asympt::{Model, ProcessModel, TrendSpec};
use chaosx_core::homog::HomogeneousSpec;
use chaosx_core::{CorrelationSpec, VarianceSpec};

/// Stationary chi-square process of two coordinates on `[0, horizon]`.
pub fn chi_model(horizon: f64) -> Model {
    let spec = ProcessModel::new(
        HomogeneousSpec::chi_square(2),
        CorrelationSpec::StationaryExp { a: 1.0, alpha: 1.0 },
        VarianceSpec::Unit,
        TrendSpec::null(),
        horizon,
    );
    Model::new(spec).expect("valid model")
}
