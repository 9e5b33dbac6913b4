//! Extreme-value numerics for Gaussian chaos processes `Y(t) = g(X(t))`.
//!
//! * [`homog`]: homogeneous functions, their sphere maxima and the tail of `g(xi)`.
//! * [`gauss`]: seeded simulation of fBm and (vector) Gaussian processes.
//! * [`constants`]: Monte Carlo estimates of Pickands and Piterbarg constants.
//! * [`asympt`]: first-order tail asymptotics of `sup (Y + h)`.
//! * [`mc`]: direct Monte Carlo estimates of the same probabilities.

pub mod asympt;
pub mod constants;
pub mod error;
pub mod func;
pub mod gauss;
pub mod homog;
pub mod mc;
pub mod quad;
pub mod special;
pub mod sphere;

pub use asympt::{
    asymptotic, required_constants, AsymptoticResult, ConstantRequest, Location, Model, ProcessModel, Regime, TrendMaximizer, TrendSpec,
};
pub use constants::{ConstantEstimate, ConstantsCache, Domain, DriftFunctionSpec};
pub use error::{Error, Result};
pub use func::NamedFn;
pub use gauss::{CorrelationSpec, GridSpec, VarianceSpec};
pub use homog::{HomogeneousKind, HomogeneousSpec, SphereAnalysis};
pub use mc::{compare, estimate_sup_prob, ComparisonRow, EstimateWithCI, GridStep};
