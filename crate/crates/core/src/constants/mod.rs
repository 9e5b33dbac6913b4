//! Monte Carlo estimates of the Pickands constant `H_alpha` and of the
//! Piterbarg constant `P^f_{alpha,a}(E)`, and a file-backed cache for them.

mod cache;
mod pickands;
mod piterbarg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, Tolerance};
use crate::special::gamma;

pub use cache::{CacheEntry, ConstantKind, ConstantsCache, Provenance};
pub use pickands::{
    pickands, pickands_finite, pickands_ladder, pickands_with_ladder, Ladder, LadderCell, PickandsEstimator, PickandsOptions,
};
pub use piterbarg::{piterbarg, piterbarg_truncation_bound, PiterbargOptions};

/// Drift `f(t) = c_gamma |t|^gamma + b_beta |t|^beta`, or zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftFunctionSpec {
    Zero,
    PowerSum { c_gamma: f64, gamma: f64, b_beta: f64, beta: f64 },
}

impl DriftFunctionSpec {
    /// Single power `coef |t|^power`.
    pub fn power(coef: f64, power: f64) -> Self {
        DriftFunctionSpec::PowerSum { c_gamma: coef, gamma: power, b_beta: 0.0, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftFunctionSpec::Zero => Ok(()),
            DriftFunctionSpec::PowerSum { c_gamma, gamma, b_beta, beta } => {
                let ok = c_gamma >= 0.0
                    && b_beta >= 0.0
                    && gamma > 0.0
                    && beta > 0.0
                    && [c_gamma, gamma, b_beta, beta].iter().all(|v| v.is_finite());
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("drift needs nonnegative finite coefficients and positive powers, got {self:?}")))
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DriftFunctionSpec::Zero => true,
            DriftFunctionSpec::PowerSum { c_gamma, b_beta, .. } => c_gamma == 0.0 && b_beta == 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            DriftFunctionSpec::Zero => 0.0,
            DriftFunctionSpec::PowerSum { c_gamma, gamma, b_beta, beta } => {
                let t = t.abs();
                let mut v = 0.0;
                if c_gamma != 0.0 {
                    v += c_gamma * t.powf(gamma);
                }
                if b_beta != 0.0 {
                    v += b_beta * t.powf(beta);
                }
                v
            }
        }
    }

    /// Comma-free text form used in cache keys and CSV output.
    pub fn descriptor(&self) -> String {
        match *self {
            DriftFunctionSpec::Zero => "zero".into(),
            DriftFunctionSpec::PowerSum { c_gamma, gamma, b_beta, beta } => {
                let mut terms = Vec::new();
                if c_gamma != 0.0 {
                    terms.push(format!("{c_gamma}*t^{gamma}"));
                }
                if b_beta != 0.0 {
                    terms.push(format!("{b_beta}*t^{beta}"));
                }
                if terms.is_empty() {
                    "zero".into()
                } else {
                    terms.join("+")
                }
            }
        }
    }

    /// `int_0^inf exp(-f(t)) dt`: closed form for a single power, adaptive
    /// quadrature (relative tolerance 1e-8) otherwise.
    pub fn integral_exp_neg(&self) -> Result<f64> {
        self.validate()?;
        if self.is_zero() {
            return Err(Error::Applicability("the integral of exp(-f) diverges for f = 0".into()));
        }
        let DriftFunctionSpec::PowerSum { c_gamma, gamma, b_beta, beta } = *self else { unreachable!("zero handled above") };
        let single = |c: f64, g: f64| gamma_integral(c, g);
        if b_beta == 0.0 {
            return Ok(single(c_gamma, gamma));
        }
        if c_gamma == 0.0 {
            return Ok(single(b_beta, beta));
        }
        let f = *self;
        integrate_to_infinity(move |t| (-f.eval(t)).exp(), 0.0, Tolerance::relative(1e-8))
    }
}

/// `int_0^inf exp(-c t^g) dt = Gamma(1 + 1/g) c^{-1/g}`.
pub fn gamma_integral(c: f64, g: f64) -> f64 {
    gamma(1.0 + 1.0 / g) * c.powf(-1.0 / g)
}

/// Index set over which the supremum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    HalfLine,
    FullLine,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::HalfLine => "half_line",
            Domain::FullLine => "full_line",
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Monte Carlo estimate of a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_rep: usize,
    pub delta: f64,
    pub horizon: f64,
    pub extrapolated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ConstantEstimate {
    /// A known value with no sampling error.
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0, n_rep: 0, delta: 0.0, horizon: 0.0, extrapolated: false, warnings: vec![] }
    }
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Number of grid steps of size `delta` in `s`, if `delta` divides `s`.
pub(crate) fn steps(s: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && s >= 0.0 && s.is_finite()) {
        return Err(Error::Precondition(format!("need delta > 0 and S >= 0, got S = {s}, delta = {delta}")));
    }
    let k = (s / delta).round();
    if (s - k * delta).abs() > 1e-12 * s.max(1.0) {
        return Err(Error::Precondition(format!("delta = {delta} does not divide S = {s}")));
    }
    Ok(k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn drift_integrals() {
        let f = DriftFunctionSpec::power(1.0, 2.0);
        assert_relative_eq!(f.integral_exp_neg().unwrap(), PI.sqrt() / 2.0, max_relative = 1e-14);
        let g = DriftFunctionSpec::PowerSum { c_gamma: 0.0, gamma: 1.0, b_beta: 2.0, beta: 1.0 };
        assert_relative_eq!(g.integral_exp_neg().unwrap(), 0.5, max_relative = 1e-14);
        // Closed form against quadrature.
        for (c, gm) in [(0.5, 0.7), (3.0, 1.5), (1.0, 4.0)] {
            let q = integrate_to_infinity(|t| (-c * f64::powf(t, gm)).exp(), 0.0, Tolerance::relative(1e-11)).unwrap();
            assert_relative_eq!(gamma_integral(c, gm), q, max_relative = 1e-9);
        }
        let mixed = DriftFunctionSpec::PowerSum { c_gamma: 1.0, gamma: 1.0, b_beta: 1.0, beta: 2.0 };
        let q = integrate_to_infinity(|t| (-t - t * t).exp(), 0.0, Tolerance::relative(1e-11)).unwrap();
        assert_relative_eq!(mixed.integral_exp_neg().unwrap(), q, max_relative = 1e-8);
        assert!(DriftFunctionSpec::Zero.integral_exp_neg().is_err());
    }

    #[test]
    fn descriptors_have_no_commas() {
        let f = DriftFunctionSpec::PowerSum { c_gamma: 0.5, gamma: 2.0, b_beta: 1.0, beta: 1.5 };
        assert_eq!(f.descriptor(), "0.5*t^2+1*t^1.5");
        assert_eq!(DriftFunctionSpec::Zero.descriptor(), "zero");
    }

    #[test]
    fn divisibility() {
        assert_eq!(steps(128.0, 0.05).unwrap(), 2560);
        assert!(steps(1.0, 0.3).is_err());
    }
}
