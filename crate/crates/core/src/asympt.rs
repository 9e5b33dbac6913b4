//! First-order tail asymptotics of `P(sup_{[0,T]} (Y(t) + h(t)) > u)` for a
//! chaos process `Y = g(X)`.
//!
//! Thresholds are reduced to `g_hat = 1` internally: the power factors use
//! `u / g_hat`, and the trend coefficient `c` enters the drift as
//! `c / (p g_hat)`. The marginal tail `P(Y > x)` is taken from
//! [`tail_asympt`], which already carries `g_hat`.

use serde::{Deserialize, Serialize};

use crate::constants::{ConstantsCache, Domain, DriftFunctionSpec};
use crate::error::{condition, Error, Result};
use crate::func::{NamedFn, Peak};
use crate::gauss::{CorrelationSpec, VarianceSpec};
use crate::homog::{analyze_sphere, tail_asympt, AnalysisOptions, HomogeneousSpec, SphereAnalysis};
use crate::quad::{integrate, Tolerance};

const TIE: f64 = 1e-12;
const FIT_TOL: f64 = 0.05;

fn ties(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= TIE * x.abs().max(y.abs())
}

/// Where the trend attains its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrendMaximizer {
    /// `h` is identically zero.
    Null,
    /// `h(t0) - h(t) ~ c |t - t0|^gamma` near `t0`.
    SinglePoint { t0: f64, c: f64, gamma: f64 },
    /// Several maximizers sharing the value `h_m`.
    PointSet { points: Vec<Peak> },
    /// `h = h_m` on `[a, b]`.
    Interval { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSpec {
    #[serde(default = "zero_fn")]
    pub h: NamedFn,
    pub maximizer: TrendMaximizer,
}

fn zero_fn() -> NamedFn {
    NamedFn::constant(0.0)
}

impl TrendSpec {
    pub fn null() -> Self {
        Self { h: zero_fn(), maximizer: TrendMaximizer::Null }
    }

    /// `h(t) = h_m - c |t - t0|^gamma` with its single maximizer.
    pub fn power_peak(h_m: f64, c: f64, t0: f64, gamma: f64) -> Self {
        Self { h: NamedFn::PowerPeak { h_m, c, t0, gamma }, maximizer: TrendMaximizer::SinglePoint { t0, c, gamma } }
    }

    /// The constant trend `h = kappa`, maximal on the whole horizon.
    pub fn constant(kappa: f64, horizon: f64) -> Self {
        Self { h: NamedFn::constant(kappa), maximizer: TrendMaximizer::Interval { a: 0.0, b: horizon } }
    }

    /// Maximum of `h` as declared by the maximizer.
    pub fn h_m(&self) -> f64 {
        match &self.maximizer {
            TrendMaximizer::Null => 0.0,
            TrendMaximizer::SinglePoint { t0, .. } => self.h.eval(*t0),
            TrendMaximizer::PointSet { points } => points.iter().map(|p| self.h.eval(p.t0)).fold(f64::NEG_INFINITY, f64::max),
            TrendMaximizer::Interval { a, b } => self.h.eval(0.5 * (a + b)),
        }
    }
}

/// Checks `h(t0) - h(t0 +- w) = c w^gamma (1 + o(1))` on the windows
/// `w = T/100, T/1000, T/10000`, to 5%.
fn check_expansion(h: &NamedFn, t0: f64, c: f64, gamma: f64, horizon: f64) -> Result<()> {
    let h0 = h.eval(t0);
    let mut checked = false;
    for k in 2..=4 {
        let w = horizon * 10f64.powi(-k);
        for t in [t0 - w, t0 + w] {
            if !(0.0..=horizon).contains(&t) {
                continue;
            }
            checked = true;
            let ratio = (h0 - h.eval(t)) / (c * w.powf(gamma));
            if !((ratio - 1.0).abs() <= FIT_TOL) {
                return Err(condition(
                    "trend-expansion",
                    format!(
                        "h(t0) - h(t) at t0 = {t0}, |t - t0| = {w:e} is {ratio:.4} times c|t - t0|^gamma with c = {c}, gamma = {gamma}"
                    ),
                ));
            }
        }
    }
    if checked {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("maximizer t0 = {t0} lies outside [0, {horizon}]")))
    }
}

/// Whether a maximizer sits on the edge of `[0, T]` or inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Boundary,
    Interior,
}

/// A process `Y(t) + h(t)` with `Y = g(X)` on `[0, T]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessModel {
    pub homog: HomogeneousSpec,
    pub corr: CorrelationSpec,
    #[serde(default = "unit_var")]
    pub var: VarianceSpec,
    #[serde(default = "TrendSpec::null")]
    pub trend: TrendSpec,
    pub horizon: f64,
    /// Overrides the location derived from the position of `t0` in `[0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_location: Option<Location>,
}

fn unit_var() -> VarianceSpec {
    VarianceSpec::Unit
}

impl ProcessModel {
    pub fn new(homog: HomogeneousSpec, corr: CorrelationSpec, var: VarianceSpec, trend: TrendSpec, horizon: f64) -> Self {
        Self { homog, corr, var, trend, horizon, t0_location: None }
    }

    pub fn with_location(mut self, location: Location) -> Self {
        self.t0_location = Some(location);
        self
    }

    pub fn location_of(&self, t: f64) -> Location {
        self.t0_location.unwrap_or(if t > 0.0 && t < self.horizon { Location::Interior } else { Location::Boundary })
    }

    pub fn validate(&self) -> Result<()> {
        self.homog.validate()?;
        self.corr.validate()?;
        self.var.validate()?;
        self.trend.h.validate()?;
        let t_max = self.horizon;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidSpec(format!("horizon T must be positive, got {t_max}")));
        }
        if let VarianceSpec::LocalPower { t0, .. } = self.var {
            if !(0.0..=t_max).contains(&t0) {
                return Err(Error::InvalidSpec(format!("variance peak t0 = {t0} lies outside [0, {t_max}]")));
            }
        }
        let h = &self.trend.h;
        let in_range = |t: f64| (0.0..=t_max).contains(&t);
        match &self.trend.maximizer {
            TrendMaximizer::Null => {
                if h.as_constant() != Some(0.0) {
                    return Err(Error::InvalidSpec("a null trend maximizer needs h identically 0".into()));
                }
            }
            TrendMaximizer::SinglePoint { t0, c, gamma } => {
                if !in_range(*t0) || !(*c >= 0.0 && *gamma > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "single-point maximizer needs t0 in [0, T], c >= 0 and gamma > 0, got {:?}",
                        self.trend.maximizer
                    )));
                }
                if *c > 0.0 {
                    check_expansion(h, *t0, *c, *gamma, t_max)?;
                }
            }
            TrendMaximizer::PointSet { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidSpec("point-set maximizer needs at least one point".into()));
                }
                let h_m = self.trend.h_m();
                for p in points {
                    if !in_range(p.t0) || !(p.c > 0.0 && p.gamma > 0.0) {
                        return Err(Error::InvalidSpec(format!("maximizer {p:?} needs t0 in [0, T], c > 0 and gamma > 0")));
                    }
                    if !ties(h.eval(p.t0), h_m) && (h.eval(p.t0) - h_m).abs() > 1e-9 {
                        return Err(condition("trend-maximum", format!("h({}) = {} differs from h_m = {h_m}", p.t0, h.eval(p.t0))));
                    }
                    check_expansion(h, p.t0, p.c, p.gamma, t_max)?;
                }
            }
            TrendMaximizer::Interval { a, b } => {
                if !(in_range(*a) && in_range(*b) && a < b) {
                    return Err(Error::InvalidSpec(format!("interval maximizer needs 0 <= A < B <= T, got [{a}, {b}]")));
                }
                let h_m = self.trend.h_m();
                for k in 0..=200 {
                    let t = a + (b - a) * k as f64 / 200.0;
                    if (h.eval(t) - h_m).abs() > 1e-9 * h_m.abs().max(1.0) {
                        return Err(condition("trend-maximum", format!("h is not constant on [{a}, {b}]: h({t}) = {}", h.eval(t))));
                    }
                }
            }
        }
        if matches!(self.var, VarianceSpec::Unit) && !matches!(self.trend.maximizer, TrendMaximizer::Null) {
            let h_m = self.trend.h_m();
            for k in 0..=2000 {
                let t = t_max * k as f64 / 2000.0;
                if h.eval(t) > h_m + 1e-9 * h_m.abs().max(1.0) {
                    return Err(condition("trend-maximum", format!("h({t}) = {} exceeds the declared maximum {h_m}", h.eval(t))));
                }
            }
        }
        Ok(())
    }
}

/// A validated [`ProcessModel`] together with the analysis of `g` on the sphere.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ProcessModel,
    pub analysis: SphereAnalysis,
}

impl Model {
    pub fn new(spec: ProcessModel) -> Result<Self> {
        Self::with_options(spec, &AnalysisOptions::default())
    }

    pub fn with_options(spec: ProcessModel, opts: &AnalysisOptions) -> Result<Self> {
        spec.validate()?;
        let analysis = analyze_sphere(&spec.homog, opts)?;
        Ok(Self { spec, analysis })
    }

    fn alpha(&self) -> Result<f64> {
        self.spec.corr.alpha().ok_or_else(|| Error::Applicability("the asymptotics need a correlation with a local exponent alpha".into()))
    }

    fn a_at(&self, t: f64) -> Result<f64> {
        self.spec.corr.a_at(t).ok_or_else(|| Error::Applicability("the asymptotics need a correlation with a local scale a(t)".into()))
    }

    /// `a* = alpha p`.
    pub fn alpha_star(&self) -> Result<f64> {
        Ok(self.alpha()? * self.analysis.p)
    }
}

/// Which constant the power regime of `C_{t0}` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRegime {
    /// `beta* > alpha*`
    Pickands,
    /// `beta* = alpha*`
    Piterbarg,
    /// `beta* < alpha*`
    Talagrand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Pickands,
    Piterbarg,
    Talagrand,
    StationaryIntegral,
    WeightedIntegral,
    MultiPoint,
    IntervalMax,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Pickands => "pickands",
            Regime::Piterbarg => "piterbarg",
            Regime::Talagrand => "talagrand",
            Regime::StationaryIntegral => "stationary_integral",
            Regime::WeightedIntegral => "weighted_integral",
            Regime::MultiPoint => "multi_point",
            Regime::IntervalMax => "interval_max",
        }
    }
}

impl From<PowerRegime> for Regime {
    fn from(r: PowerRegime) -> Self {
        match r {
            PowerRegime::Pickands => Regime::Pickands,
            PowerRegime::Piterbarg => Regime::Piterbarg,
            PowerRegime::Talagrand => Regime::Talagrand,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub alpha_star: f64,
    /// Infinite when neither a variance nor a trend term applies.
    pub beta_star: f64,
    pub regime: PowerRegime,
    /// `(2/alpha* - 2/beta*)_+`; exactly zero outside the Pickands regime.
    pub exponent: f64,
    /// The `t^gamma` term attains `beta*`.
    pub gamma_term: bool,
    /// The `t^beta` term attains `beta*`.
    pub beta_term: bool,
}

/// Exponents `alpha*`, `beta*` and the regime.
///
/// With `beta` given (variance decay `1 - b|t - t0|^beta`),
/// `beta* = min(beta p, 2 gamma p/(2 - p))` for `p < 2` and `beta p`
/// otherwise; `gamma` is `None` when the trend is flat at `t0`. With only
/// `gamma` given, `beta* = 2 gamma p/(2 - p)`, defined for `p < 2` only.
pub fn exponents(p: f64, alpha: f64, beta: Option<f64>, gamma: Option<f64>) -> Result<Exponents> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidSpec(format!("order p must be positive, got {p}")));
    }
    crate::gauss::check_alpha(alpha)?;
    for (name, v) in [("beta", beta), ("gamma", gamma)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
    }
    let alpha_star = alpha * p;
    let gamma_star = match (beta, gamma) {
        (_, Some(g)) if p < 2.0 => Some(2.0 * g * p / (2.0 - p)),
        (None, Some(_)) => {
            return Err(Error::Applicability(format!(
                "a single trend maximizer with p = {p} >= 2 is covered by the weighted-integral formula, not by beta* = 2 gamma p/(2 - p)"
            )))
        }
        _ => None,
    };
    let beta_p = beta.map(|b| b * p);
    let beta_star = match (beta_p, gamma_star) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => f64::INFINITY,
    };
    let gamma_term = gamma_star.is_some_and(|y| ties(y, beta_star));
    let beta_term = beta_p.is_some_and(|x| ties(x, beta_star));
    let regime = if ties(beta_star, alpha_star) {
        PowerRegime::Piterbarg
    } else if beta_star > alpha_star {
        PowerRegime::Pickands
    } else {
        PowerRegime::Talagrand
    };
    let exponent = match regime {
        PowerRegime::Pickands => 2.0 / alpha_star - 2.0 / beta_star,
        _ => 0.0,
    };
    Ok(Exponents { alpha_star, beta_star, regime, exponent, gamma_term, beta_term })
}

/// Constants entering an asymptotic value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstantsUsed {
    pub h_alpha: Option<f64>,
    /// Piterbarg constant (summed over contributing maximizers).
    pub p_const: Option<f64>,
    /// `int_0^inf exp(-f)` in the Pickands regime (summed over contributing
    /// maximizers), or the integral of `a(t)^{1/alpha}` (possibly weighted)
    /// for the integral forms.
    pub integral: Option<f64>,
    pub h0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticResult {
    pub u: f64,
    pub value: f64,
    pub regime: Regime,
    pub alpha_star: f64,
    pub beta_star: f64,
    pub constants: ConstantsUsed,
}

/// `H_alpha` from the cache, or its exact value for `alpha` in `{1, 2}`.
pub fn pickands_constant(cache: &ConstantsCache, alpha: f64) -> Result<f64> {
    match cache.pickands(alpha) {
        Ok(e) => Ok(e.value),
        Err(e) => known_pickands(alpha).ok_or(e),
    }
}

/// `H_1 = 1` and `H_2 = 1/sqrt(pi)`.
pub fn known_pickands(alpha: f64) -> Option<f64> {
    if alpha == 1.0 {
        Some(1.0)
    } else if alpha == 2.0 {
        Some(1.0 / std::f64::consts::PI.sqrt())
    } else {
        None
    }
}

/// `int_lo^hi a(t)^{1/alpha} w(t) dt`, exact for constant `a` and `w`.
fn a_integral(model: &Model, lo: f64, hi: f64, weight: Option<&dyn Fn(f64) -> f64>) -> Result<f64> {
    let alpha = model.alpha()?;
    let corr = &model.spec.corr;
    let const_a = match corr {
        CorrelationSpec::StationaryExp { a, .. } => Some(*a),
        CorrelationSpec::LocallyStationary { a_fn, .. } => a_fn.as_constant(),
        CorrelationSpec::CustomPsdMatrix { .. } => None,
    };
    if let CorrelationSpec::LocallyStationary { a_fn, .. } = corr {
        for k in 0..=200 {
            let t = lo + (hi - lo) * k as f64 / 200.0;
            if !(a_fn.eval(t) > 0.0) {
                return Err(Error::InvalidSpec(format!("a(t) must be positive on the horizon, a({t}) = {}", a_fn.eval(t))));
            }
        }
    }
    match (const_a, weight) {
        (Some(a), None) => Ok(a.powf(1.0 / alpha) * (hi - lo)),
        (_, w) => {
            let a = |t: f64| model.a_at(t).map(|v| v.powf(1.0 / alpha)).unwrap_or(f64::NAN);
            integrate(|t| a(t) * w.map_or(1.0, |w| w(t)), lo, hi, Tolerance::relative(1e-8))
        }
    }
}

struct PointConstant {
    c_t0: f64,
    h_alpha: Option<f64>,
    p_const: Option<f64>,
    integral: Option<f64>,
}

/// Everything `C_{t0}` depends on at one point.
struct PointSetup {
    ex: Exponents,
    alpha: f64,
    a: f64,
    f: DriftFunctionSpec,
    location: Location,
}

impl PointSetup {
    fn domain(&self) -> Domain {
        match self.location {
            Location::Boundary => Domain::HalfLine,
            Location::Interior => Domain::FullLine,
        }
    }

    fn request(&self) -> Option<ConstantRequest> {
        match self.ex.regime {
            PowerRegime::Pickands => Some(ConstantRequest::Pickands { alpha: self.alpha }),
            PowerRegime::Piterbarg => Some(ConstantRequest::Piterbarg { alpha: self.alpha, a: self.a, f: self.f, domain: self.domain() }),
            PowerRegime::Talagrand => None,
        }
    }
}

/// `C_{t0}` for the given regime, drift and local scale `a`.
fn point_constant(cache: &ConstantsCache, setup: &PointSetup) -> Result<PointConstant> {
    let PointSetup { ex, alpha, a, f, location } = setup;
    match ex.regime {
        PowerRegime::Pickands => {
            let h = pickands_constant(cache, *alpha)?;
            let integral = f.integral_exp_neg()?;
            let one_sided = h * a.powf(1.0 / alpha) * integral;
            let c_t0 = match location {
                Location::Boundary => one_sided,
                Location::Interior => 2.0 * one_sided,
            };
            Ok(PointConstant { c_t0, h_alpha: Some(h), p_const: None, integral: Some(integral) })
        }
        PowerRegime::Piterbarg => {
            let p = cache.piterbarg(*alpha, *a, f, setup.domain())?.value;
            Ok(PointConstant { c_t0: p, h_alpha: None, p_const: Some(p), integral: None })
        }
        PowerRegime::Talagrand => Ok(PointConstant { c_t0: 1.0, h_alpha: None, p_const: None, integral: None }),
    }
}

fn drift(ex: &Exponents, c_norm: f64, gamma: Option<f64>, b: f64, beta: Option<f64>) -> DriftFunctionSpec {
    DriftFunctionSpec::PowerSum {
        c_gamma: if ex.gamma_term { c_norm } else { 0.0 },
        gamma: gamma.unwrap_or(1.0),
        b_beta: if ex.beta_term { b } else { 0.0 },
        beta: beta.unwrap_or(1.0),
    }
}

fn check_u(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold u = {u} is not finite")))
    }
}

/// Local trend data `(c, gamma, h(t0))` at the variance peak `t0`.
fn trend_at(model: &Model, t0: f64) -> Result<(f64, Option<f64>, f64)> {
    let trend = &model.spec.trend;
    let same = |t: f64| (t - t0).abs() <= 1e-12 * model.spec.horizon.max(1.0);
    let h_t0 = trend.h.eval(t0);
    match &trend.maximizer {
        TrendMaximizer::Null => Ok((0.0, None, 0.0)),
        TrendMaximizer::SinglePoint { t0: t, c, gamma } if same(*t) => Ok((*c, (*c > 0.0).then_some(*gamma), h_t0)),
        TrendMaximizer::PointSet { points } => points
            .iter()
            .find(|p| same(p.t0))
            .map(|p| (p.c, Some(p.gamma), h_t0))
            .ok_or_else(|| Error::Applicability(format!("no trend maximizer at the variance peak t0 = {t0}"))),
        TrendMaximizer::Interval { a, b } if (*a..=*b).contains(&t0) => Ok((0.0, None, h_t0)),
        _ => Err(Error::Applicability(format!("the trend expansion must be given at the variance peak t0 = {t0}"))),
    }
}

fn thm3_setup(model: &Model) -> Result<(PointSetup, f64)> {
    let VarianceSpec::LocalPower { b, beta, t0 } = model.spec.var else {
        return Err(Error::Applicability("the non-stationary formula needs a local_power variance".into()));
    };
    let an = &model.analysis;
    let alpha = model.alpha()?;
    let a = model.a_at(t0)?;
    let (c, gamma, h_t0) = trend_at(model, t0)?;
    let gamma = if an.p < 2.0 { gamma } else { None };
    let ex = exponents(an.p, alpha, Some(beta), gamma)?;
    let f = drift(&ex, c / (an.p * an.g_hat), gamma, b, Some(beta));
    Ok((PointSetup { ex, alpha, a, f, location: model.spec.location_of(t0) }, h_t0))
}

/// Non-stationary case: variance `1 - b|t - t0|^beta` peaking at `t0`.
///
/// `C_{t0} u^{(2/alpha* - 2/beta*)_+} P(Y(t0) > u - h(t0))`.
pub fn thm3_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    let an = &model.analysis;
    let (setup, h_t0) = thm3_setup(model)?;
    let ex = setup.ex;
    let pc = point_constant(cache, &setup)?;
    let tail = tail_asympt(an, u - h_t0)?;
    Ok(AsymptoticResult {
        u,
        value: pc.c_t0 * (u / an.g_hat).powf(ex.exponent) * tail,
        regime: ex.regime.into(),
        alpha_star: ex.alpha_star,
        beta_star: ex.beta_star,
        constants: ConstantsUsed { h_alpha: pc.h_alpha, p_const: pc.p_const, integral: pc.integral, h0: an.h0 },
    })
}

fn require_unit(model: &Model, what: &str) -> Result<()> {
    if matches!(model.spec.var, VarianceSpec::Unit) {
        Ok(())
    } else {
        Err(Error::Applicability(format!("{what} needs unit variance")))
    }
}

/// `H_alpha int_lo^hi a(t)^{1/alpha} dt (u/g_hat)^{2/alpha*} P(Y > u - shift)`.
fn integral_form(model: &Model, cache: &ConstantsCache, u: f64, lo: f64, hi: f64, shift: f64, regime: Regime) -> Result<AsymptoticResult> {
    let an = &model.analysis;
    let alpha = model.alpha()?;
    let h = pickands_constant(cache, alpha)?;
    let integral = a_integral(model, lo, hi, None)?;
    let alpha_star = alpha * an.p;
    let tail = tail_asympt(an, u - shift)?;
    Ok(AsymptoticResult {
        u,
        value: h * integral * (u / an.g_hat).powf(2.0 / alpha_star) * tail,
        regime,
        alpha_star,
        beta_star: f64::INFINITY,
        constants: ConstantsUsed { h_alpha: Some(h), p_const: None, integral: Some(integral), h0: an.h0 },
    })
}

/// Locally stationary case without trend:
/// `H_alpha int_0^T a(t)^{1/alpha} dt u^{2/alpha*} P(Y(0) > u)`.
pub fn thm1_stationary_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    require_unit(model, "the stationary formula")?;
    if !matches!(model.spec.trend.maximizer, TrendMaximizer::Null) {
        return Err(Error::Applicability("the stationary formula needs a null trend".into()));
    }
    integral_form(model, cache, u, 0.0, model.spec.horizon, 0.0, Regime::StationaryIntegral)
}

/// One maximizer `t0` of the trend with `h_m - h(t) ~ c|t - t0|^gamma`, `p < 2`.
fn point_setup(model: &Model, t0: f64, c: f64, gamma: f64) -> Result<PointSetup> {
    let an = &model.analysis;
    let alpha = model.alpha()?;
    let ex = exponents(an.p, alpha, None, Some(gamma))?;
    let f = DriftFunctionSpec::power(c / (an.p * an.g_hat), gamma);
    Ok(PointSetup { ex, alpha, a: model.a_at(t0)?, f, location: model.spec.location_of(t0) })
}

fn single_point(model: &Model, cache: &ConstantsCache, t0: f64, c: f64, gamma: f64) -> Result<(Exponents, PointConstant)> {
    let setup = point_setup(model, t0, c, gamma)?;
    Ok((setup.ex, point_constant(cache, &setup)?))
}

fn trend_points(model: &Model) -> Option<Vec<Peak>> {
    match &model.spec.trend.maximizer {
        TrendMaximizer::PointSet { points } => Some(points.clone()),
        TrendMaximizer::SinglePoint { t0, c, gamma } => Some(vec![Peak { t0: *t0, c: *c, gamma: *gamma }]),
        _ => None,
    }
}

/// Locally stationary case with a single trend maximizer and `p < 2`:
/// `C_{t0} u^{(2/alpha* - 2/beta*)_+} P(Y(0) > u - h_m)` with
/// `f(t) = (c/p) t^gamma` and `a = a(t0)`.
pub fn thm1_single_max_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    require_unit(model, "the single-maximizer formula")?;
    let TrendMaximizer::SinglePoint { t0, c, gamma } = model.spec.trend.maximizer else {
        return Err(Error::Applicability("the single-maximizer formula needs a single_point trend maximizer".into()));
    };
    if !(c > 0.0) {
        return Err(Error::Applicability("the single-maximizer formula needs c > 0".into()));
    }
    let an = &model.analysis;
    let (ex, pc) = single_point(model, cache, t0, c, gamma)?;
    let tail = tail_asympt(an, u - model.spec.trend.h_m())?;
    Ok(AsymptoticResult {
        u,
        value: pc.c_t0 * (u / an.g_hat).powf(ex.exponent) * tail,
        regime: ex.regime.into(),
        alpha_star: ex.alpha_star,
        beta_star: ex.beta_star,
        constants: ConstantsUsed { h_alpha: pc.h_alpha, p_const: pc.p_const, integral: pc.integral, h0: an.h0 },
    })
}

/// Locally stationary case with `p >= 2`:
/// `H_alpha int_0^T a(t)^{1/alpha} e^{h(t)/2 [p = 2]} dt u^{2/alpha*} P(Y(0) > u)`.
pub fn thm1_p_ge2_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    require_unit(model, "the weighted-integral formula")?;
    let an = &model.analysis;
    if an.p < 2.0 {
        return Err(Error::Applicability(format!("the weighted-integral formula needs p >= 2, got {}", an.p)));
    }
    let alpha = model.alpha()?;
    let h = pickands_constant(cache, alpha)?;
    let t_max = model.spec.horizon;
    let trend = &model.spec.trend.h;
    let integral = if an.p != 2.0 {
        a_integral(model, 0.0, t_max, None)?
    } else if let Some(kappa) = trend.as_constant() {
        a_integral(model, 0.0, t_max, None)? * (kappa / (2.0 * an.g_hat)).exp()
    } else {
        let g_hat = an.g_hat;
        a_integral(model, 0.0, t_max, Some(&|t| (trend.eval(t) / (2.0 * g_hat)).exp()))?
    };
    let alpha_star = alpha * an.p;
    let tail = tail_asympt(an, u)?;
    Ok(AsymptoticResult {
        u,
        value: h * integral * (u / an.g_hat).powf(2.0 / alpha_star) * tail,
        regime: Regime::WeightedIntegral,
        alpha_star,
        beta_star: f64::INFINITY,
        constants: ConstantsUsed { h_alpha: Some(h), p_const: None, integral: Some(integral), h0: an.h0 },
    })
}

/// Several trend maximizers, `p < 2`: the points with the largest exponent
/// `(2/alpha* - 2/beta*_j)_+` contribute `sum_j C_{t_j}`; the others are of
/// lower order.
pub fn multi_point_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    require_unit(model, "the multi-point formula")?;
    let Some(points) = trend_points(model) else {
        return Err(Error::Applicability("the multi-point formula needs a point_set trend maximizer".into()));
    };
    let an = &model.analysis;
    let per_point = points.iter().map(|p| single_point(model, cache, p.t0, p.c, p.gamma)).collect::<Result<Vec<_>>>()?;
    let top = per_point.iter().map(|(ex, _)| ex.exponent).fold(f64::NEG_INFINITY, f64::max);
    let mut c_sum = 0.0;
    let mut beta_star = f64::NEG_INFINITY;
    let mut used = ConstantsUsed { h0: an.h0, ..Default::default() };
    let add = |slot: &mut Option<f64>, v: Option<f64>| {
        if let Some(v) = v {
            *slot = Some(slot.unwrap_or(0.0) + v);
        }
    };
    for (ex, pc) in per_point.iter().filter(|(ex, _)| ties(ex.exponent, top)) {
        c_sum += pc.c_t0;
        beta_star = beta_star.max(ex.beta_star);
        if pc.h_alpha.is_some() {
            used.h_alpha = pc.h_alpha;
        }
        add(&mut used.p_const, pc.p_const);
        add(&mut used.integral, pc.integral);
    }
    let alpha_star = per_point[0].0.alpha_star;
    let tail = tail_asympt(an, u - model.spec.trend.h_m())?;
    Ok(AsymptoticResult {
        u,
        value: c_sum * (u / an.g_hat).powf(top) * tail,
        regime: Regime::MultiPoint,
        alpha_star,
        beta_star,
        constants: used,
    })
}

/// Trend maximal on `[A, B]`:
/// `H_alpha int_A^B a(t)^{1/alpha} dt u^{2/alpha*} P(Y(0) > u - h_m)`.
pub fn interval_max_tail(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    check_u(u)?;
    require_unit(model, "the interval formula")?;
    let TrendMaximizer::Interval { a, b } = model.spec.trend.maximizer else {
        return Err(Error::Applicability("the interval formula needs an interval trend maximizer".into()));
    };
    integral_form(model, cache, u, a, b, model.spec.trend.h_m(), Regime::IntervalMax)
}

/// Routes to the formula matching the model: non-stationary variance,
/// no trend, `p >= 2`, one, several or an interval of trend maximizers.
pub fn asymptotic(model: &Model, cache: &ConstantsCache, u: f64) -> Result<AsymptoticResult> {
    if matches!(model.spec.var, VarianceSpec::LocalPower { .. }) {
        return thm3_tail(model, cache, u);
    }
    match model.spec.trend.maximizer {
        TrendMaximizer::Null => thm1_stationary_tail(model, cache, u),
        _ if model.analysis.p >= 2.0 => thm1_p_ge2_tail(model, cache, u),
        TrendMaximizer::SinglePoint { .. } => thm1_single_max_tail(model, cache, u),
        TrendMaximizer::PointSet { .. } => multi_point_tail(model, cache, u),
        TrendMaximizer::Interval { .. } => interval_max_tail(model, cache, u),
    }
}

/// A constant an asymptotic formula reads from the cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstantRequest {
    Pickands { alpha: f64 },
    Piterbarg { alpha: f64, a: f64, f: DriftFunctionSpec, domain: Domain },
}

/// Constants [`asymptotic`] reads from the cache for this model, without
/// duplicates. `H_alpha` is listed even where its exact value is known.
pub fn required_constants(model: &Model) -> Result<Vec<ConstantRequest>> {
    let mut out: Vec<ConstantRequest> = Vec::new();
    if matches!(model.spec.var, VarianceSpec::LocalPower { .. }) {
        out.extend(thm3_setup(model)?.0.request());
    } else {
        match trend_points(model) {
            Some(points) if model.analysis.p < 2.0 => {
                let setups = points.iter().map(|p| point_setup(model, p.t0, p.c, p.gamma)).collect::<Result<Vec<_>>>()?;
                let top = setups.iter().map(|s| s.ex.exponent).fold(f64::NEG_INFINITY, f64::max);
                for s in setups.iter().filter(|s| ties(s.ex.exponent, top)) {
                    if let Some(r) = s.request() {
                        if !out.contains(&r) {
                            out.push(r);
                        }
                    }
                }
            }
            _ => out.push(ConstantRequest::Pickands { alpha: model.alpha()? }),
        }
    }
    Ok(out)
}
