//! Serializable scalar functions of time, used for `a(t)` and the trend `h(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One peak `c |t - t0|^gamma` below the common maximum of a [`NamedFn::MultiPeak`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peak {
    pub t0: f64,
    pub c: f64,
    pub gamma: f64,
}

/// Named-function vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedFn {
    /// `v`
    Const { v: f64 },
    /// `v0 + v1 * t`
    Linear { v0: f64, v1: f64 },
    /// `h_m - c |t - t0|^gamma`
    PowerPeak { h_m: f64, c: f64, t0: f64, gamma: f64 },
    /// `h_m - min_j c_j |t - t_j|^gamma_j`
    MultiPeak { h_m: f64, peaks: Vec<Peak> },
    /// Piecewise-linear interpolation through `(t, v)` points, constant
    /// beyond the first and last knots.
    Table { points: Vec<(f64, f64)> },
}

impl NamedFn {
    pub fn constant(v: f64) -> Self {
        NamedFn::Const { v }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            NamedFn::Const { v } if !v.is_finite() => bad(format!("const value {v} is not finite")),
            NamedFn::Linear { v0, v1 } if !(v0.is_finite() && v1.is_finite()) => bad("linear coefficients must be finite".into()),
            NamedFn::PowerPeak { h_m, c, t0, gamma } => {
                if !(h_m.is_finite() && t0.is_finite()) || *c < 0.0 || *gamma <= 0.0 {
                    bad(format!("power_peak needs finite h_m/t0, c >= 0 and gamma > 0 (got c={c}, gamma={gamma})"))
                } else {
                    Ok(())
                }
            }
            NamedFn::MultiPeak { h_m, peaks } => {
                if peaks.is_empty() || !h_m.is_finite() {
                    return bad("multi_peak needs a finite h_m and at least one peak".into());
                }
                for p in peaks {
                    if !p.t0.is_finite() || p.c <= 0.0 || p.gamma <= 0.0 {
                        return bad(format!("multi_peak peak {p:?} needs c > 0 and gamma > 0"));
                    }
                }
                Ok(())
            }
            NamedFn::Table { points } => {
                if points.is_empty() {
                    return bad("table needs at least one point".into());
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("table knots must be strictly increasing in t".into());
                }
                if points.iter().any(|(t, v)| !(t.is_finite() && v.is_finite())) {
                    return bad("table entries must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            NamedFn::Const { v } => *v,
            NamedFn::Linear { v0, v1 } => v0 + v1 * t,
            NamedFn::PowerPeak { h_m, c, t0, gamma } => h_m - c * (t - t0).abs().powf(*gamma),
            NamedFn::MultiPeak { h_m, peaks } => {
                let drop = peaks.iter().map(|p| p.c * (t - p.t0).abs().powf(p.gamma)).fold(f64::INFINITY, f64::min);
                h_m - drop
            }
            NamedFn::Table { points } => interpolate(points, t),
        }
    }

    /// True when the function is constant on the real line.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            NamedFn::Const { v } => Some(*v),
            NamedFn::Linear { v0, v1 } if *v1 == 0.0 => Some(*v0),
            NamedFn::Table { points } if points.len() == 1 => Some(points[0].1),
            _ => None,
        }
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[k - 1];
    let (t1, v1) = points[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}
