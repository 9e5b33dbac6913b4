//! Homogeneous functions `g` on `R^d`, their maxima on the unit sphere and the
//! tail and density asymptotics of `g(xi)` for a standard normal vector `xi`.

mod analysis;
mod tail;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sphere;

pub use analysis::{
    analyze_sphere, h0, hessian_det, hessian_det_in_chart, tangent_hessian, AnalysisOptions, ManifoldKind, Maximizer, MaximizerSet,
    SphereAnalysis,
};
pub use tail::{pdf_asympt, tail_asympt, validity_floor};

/// User-supplied evaluator of a custom homogeneous function.
pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Parametrization `theta -> x(theta)` of an `m`-dimensional maximizer
/// manifold over the box `[lower, upper]`. Returned points are normalized.
#[derive(Clone)]
pub struct ManifoldParametrization {
    pub m: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for ManifoldParametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldParametrization")
            .field("m", &self.m)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

impl ManifoldParametrization {
    pub fn point(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = (self.map)(theta);
        sphere::normalize(&mut x);
        x
    }
}

/// Custom function with an optional description of its maximizer manifold.
#[derive(Clone)]
pub struct CustomFn {
    pub eval: Evaluator,
    pub manifold: Option<ManifoldParametrization>,
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn").field("manifold", &self.manifold).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum HomogeneousKind {
    /// `||x||_rho^p`, with `rho = inf` for the maximum norm.
    LrhoNorm {
        rho: f64,
    },
    /// `x_1 x_2 .. x_d`, homogeneous of order `d`.
    Product,
    /// `max_i x_i`, homogeneous of order 1.
    Max,
    Custom(CustomFn),
}

/// A homogeneous function `g(x) = scale * g_kind(x)` of order `p` on `R^d`.
///
/// Built-in kinds (de)serialize as `{"kind": "lrho_norm", "rho": 2, "p": 2,
/// "d": 2}`; `p` may be omitted for `product` and `max`, and `rho` may be the
/// string `"inf"`. Custom functions cannot be serialized.
#[derive(Debug, Clone)]
pub struct HomogeneousSpec {
    pub kind: HomogeneousKind,
    pub p: f64,
    pub d: usize,
    pub scale: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum KindName {
    LrhoNorm,
    Product,
    Max,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "rho_serde")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    d: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

mod rho_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rho: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match rho {
            Some(r) if r.is_infinite() => s.serialize_str("inf"),
            Some(r) => s.serialize_f64(*r),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Rho {
            Num(f64),
            Text(String),
        }
        match Rho::deserialize(d)? {
            Rho::Num(v) => Ok(Some(v)),
            Rho::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(Some(f64::INFINITY)),
            Rho::Text(s) => Err(serde::de::Error::custom(format!("rho must be a number or \"inf\", got {s:?}"))),
        }
    }
}

impl Serialize for HomogeneousSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, rho, p) = match &self.kind {
            HomogeneousKind::LrhoNorm { rho } => (KindName::LrhoNorm, Some(*rho), Some(self.p)),
            HomogeneousKind::Product => (KindName::Product, None, None),
            HomogeneousKind::Max => (KindName::Max, None, None),
            HomogeneousKind::Custom(_) => return Err(serde::ser::Error::custom("custom homogeneous functions cannot be serialized")),
        };
        SpecRepr { kind, rho, p, d: self.d, scale: self.scale }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomogeneousSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SpecRepr::deserialize(d)?;
        let de = |m: String| <D::Error as serde::de::Error>::custom(m);
        let (kind, p) = match r.kind {
            KindName::LrhoNorm => {
                let rho = r.rho.ok_or_else(|| de("lrho_norm needs a `rho` field".into()))?;
                let p = r.p.ok_or_else(|| de("lrho_norm needs an order `p`".into()))?;
                (HomogeneousKind::LrhoNorm { rho }, p)
            }
            KindName::Product => (HomogeneousKind::Product, r.p.unwrap_or(r.d as f64)),
            KindName::Max => (HomogeneousKind::Max, r.p.unwrap_or(1.0)),
        };
        if r.rho.is_some() && r.kind != KindName::LrhoNorm {
            return Err(de("`rho` only applies to lrho_norm".into()));
        }
        let spec = HomogeneousSpec { kind, p, d: r.d, scale: r.scale };
        spec.validate().map_err(|e| de(e.to_string()))?;
        Ok(spec)
    }
}

impl HomogeneousSpec {
    pub fn lrho(rho: f64, p: f64, d: usize) -> Result<Self> {
        Self::new(HomogeneousKind::LrhoNorm { rho }, p, d)
    }

    /// Chi-square type function `||x||_2^2`.
    pub fn chi_square(d: usize) -> Self {
        Self::lrho(2.0, 2.0, d).expect("valid built-in")
    }

    pub fn product(d: usize) -> Result<Self> {
        Self::new(HomogeneousKind::Product, d as f64, d)
    }

    pub fn max(d: usize) -> Result<Self> {
        Self::new(HomogeneousKind::Max, 1.0, d)
    }

    pub fn custom(eval: Evaluator, p: f64, d: usize) -> Result<Self> {
        Self::new(HomogeneousKind::Custom(CustomFn { eval, manifold: None }), p, d)
    }

    pub fn custom_with_manifold(eval: Evaluator, p: f64, d: usize, manifold: ManifoldParametrization) -> Result<Self> {
        Self::new(HomogeneousKind::Custom(CustomFn { eval, manifold: Some(manifold) }), p, d)
    }

    pub fn new(kind: HomogeneousKind, p: f64, d: usize) -> Result<Self> {
        let spec = Self { kind, p, d, scale: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Same function multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut s = self.clone();
        s.scale *= factor;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidSpec(m));
        if self.d < 2 {
            return invalid(format!("dimension d must be at least 2, got {}", self.d));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return invalid(format!("order p must be positive and finite, got {}", self.p));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return invalid(format!("scale must be positive and finite, got {}", self.scale));
        }
        match &self.kind {
            HomogeneousKind::LrhoNorm { rho } => {
                if rho.is_nan() || *rho < 1.0 {
                    return invalid(format!("rho must lie in [1, inf], got {rho}"));
                }
            }
            HomogeneousKind::Product => {
                if self.p != self.d as f64 {
                    return invalid(format!("product of {} coordinates has order {}, got p = {}", self.d, self.d, self.p));
                }
            }
            HomogeneousKind::Max => {
                if self.p != 1.0 {
                    return invalid(format!("max has order 1, got p = {}", self.p));
                }
            }
            HomogeneousKind::Custom(c) => {
                self.check_custom_homogeneity()?;
                if let Some(mp) = &c.manifold {
                    if mp.m == 0 || mp.m >= self.d - 1 || mp.lower.len() != mp.m || mp.upper.len() != mp.m {
                        return invalid(format!(
                            "manifold parametrization needs 1 <= m <= d-2 = {} and box bounds of length m",
                            self.d - 2
                        ));
                    }
                    if mp.lower.iter().zip(&mp.upper).any(|(a, b)| !(a < b)) {
                        return invalid("manifold parameter box must have lower < upper".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Numerical homogeneity and positivity probes for custom functions.
    fn check_custom_homogeneity(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_4a11);
        let mut positive = false;
        for i in 0..256 {
            let x = sphere::random_point(self.d, &mut rng);
            let gx = self.eval_unchecked(&x);
            if !gx.is_finite() {
                return Err(Error::InvalidSpec(format!("custom g is not finite at {x:?}")));
            }
            positive |= gx > 0.0;
            if i < 32 {
                let c = 0.25 + 3.75 * (i as f64) / 31.0;
                let y: Vec<f64> = x.iter().map(|v| c * v).collect();
                let lhs = self.eval_unchecked(&y);
                let rhs = c.powf(self.p) * gx;
                if (lhs - rhs).abs() > 1e-10 * (1.0 + rhs.abs()) {
                    return Err(Error::InvalidSpec(format!(
                        "custom g is not homogeneous of order {}: g(c x) = {lhs}, c^p g(x) = {rhs} at c = {c}",
                        self.p
                    )));
                }
            }
        }
        if !positive {
            return Err(Error::InvalidSpec("custom g is not positive anywhere on the probe set".into()));
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            HomogeneousKind::LrhoNorm { rho } => lrho_norm(x, *rho).powf(self.p),
            HomogeneousKind::Product => x.iter().product(),
            HomogeneousKind::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            HomogeneousKind::Custom(c) => (c.eval)(x),
        };
        self.scale * raw
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, HomogeneousKind::Custom(_))
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            HomogeneousKind::LrhoNorm { rho } => format!("lrho(rho={rho},p={},d={})", self.p, self.d),
            HomogeneousKind::Product => format!("product(d={})", self.d),
            HomogeneousKind::Max => format!("max(d={})", self.d),
            HomogeneousKind::Custom(_) => format!("custom(p={},d={})", self.p, self.d),
        }
    }

    /// Analytic gradient and Hessian in Cartesian coordinates for built-in
    /// kinds; `None` for custom functions. For `Max` and `rho = inf` the
    /// derivatives of the active smooth piece are returned.
    pub fn derivatives(&self, x: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let d = self.d;
        let (grad, hess) = match &self.kind {
            HomogeneousKind::Custom(_) => return None,
            HomogeneousKind::Product => {
                let grad = DVector::from_fn(d, |i, _| (0..d).filter(|&k| k != i).map(|k| x[k]).product());
                let hess =
                    DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { (0..d).filter(|&k| k != i && k != j).map(|k| x[k]).product() });
                (grad, hess)
            }
            HomogeneousKind::Max => {
                let i = argmax(x, |v| v);
                (DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 }), DMatrix::zeros(d, d))
            }
            HomogeneousKind::LrhoNorm { rho } if rho.is_infinite() => {
                let i = argmax(x, f64::abs);
                let xi = x[i];
                let p = self.p;
                let mut grad = DVector::zeros(d);
                grad[i] = p * xi.abs().powf(p - 1.0) * xi.signum();
                let mut hess = DMatrix::zeros(d, d);
                hess[(i, i)] = p * (p - 1.0) * xi.abs().powf(p - 2.0);
                (grad, hess)
            }
            HomogeneousKind::LrhoNorm { rho } => {
                let rho = *rho;
                let p = self.p;
                let n = lrho_norm(x, rho);
                let dn = DVector::from_fn(d, |i, _| x[i].signum() * x[i].abs().powf(rho - 1.0) * n.powf(1.0 - rho));
                let mut dnn = (&dn * dn.transpose()) * ((1.0 - rho) / n);
                for i in 0..d {
                    if rho != 1.0 {
                        dnn[(i, i)] += (rho - 1.0) * x[i].abs().powf(rho - 2.0) * n.powf(1.0 - rho);
                    }
                }
                let grad = &dn * (p * n.powf(p - 1.0));
                let hess = (&dn * dn.transpose()) * (p * (p - 1.0) * n.powf(p - 2.0)) + dnn * (p * n.powf(p - 1.0));
                (grad, hess)
            }
        };
        Some((grad * self.scale, hess * self.scale))
    }
}

fn argmax(x: &[f64], key: impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    for i in 1..x.len() {
        if key(x[i]) > key(x[best]) {
            best = i;
        }
    }
    best
}

fn lrho_norm(x: &[f64], rho: f64) -> f64 {
    if rho.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if rho == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(rho)).sum::<f64>().powf(1.0 / rho)
    }
}

/// `g(x)`.
pub fn eval_g(spec: &HomogeneousSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.d {
        return Err(Error::Domain(format!("expected a vector of length {}, got {}", spec.d, x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite input {x:?}")));
    }
    Ok(spec.eval_unchecked(x))
}

pub(crate) fn eval_fast(spec: &HomogeneousSpec, x: &[f64]) -> f64 {
    spec.eval_unchecked(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn direct_evaluation() {
        assert_eq!(eval_g(&HomogeneousSpec::product(2).unwrap(), &[1.0, 2.0]).unwrap(), 2.0);
        assert_relative_eq!(eval_g(&HomogeneousSpec::chi_square(2), &[3.0, 4.0]).unwrap(), 25.0, max_relative = 1e-15);
        assert_eq!(eval_g(&HomogeneousSpec::max(3).unwrap(), &[-1.0, 5.0, 0.0]).unwrap(), 5.0);
        assert!(eval_g(&HomogeneousSpec::max(2).unwrap(), &[f64::NAN, 0.0]).is_err());
        assert!(eval_g(&HomogeneousSpec::max(2).unwrap(), &[1.0]).is_err());
    }

    #[test]
    fn rejects_inconsistent_orders() {
        assert!(HomogeneousSpec::new(HomogeneousKind::Product, 2.0, 3).is_err());
        assert!(HomogeneousSpec::new(HomogeneousKind::Max, 2.0, 3).is_err());
        assert!(HomogeneousSpec::lrho(0.5, 1.0, 2).is_err());
        assert!(HomogeneousSpec::lrho(2.0, 1.0, 1).is_err());
    }

    #[test]
    fn custom_homogeneity_is_verified() {
        let wrong = HomogeneousSpec::custom(Arc::new(|x: &[f64]| x[0] * x[0] + x[1]), 2.0, 2);
        assert!(matches!(wrong, Err(Error::InvalidSpec(_))));
        let negative = HomogeneousSpec::custom(Arc::new(|x: &[f64]| -(x[0] * x[0] + x[1] * x[1])), 2.0, 2);
        assert!(negative.is_err());
        let ok = HomogeneousSpec::custom(Arc::new(|x: &[f64]| x[0] * x[0] + 3.0 * x[1] * x[1]), 2.0, 2);
        assert!(ok.is_ok());
    }

    #[test]
    fn serde_shape() {
        let s: HomogeneousSpec = serde_json::from_str(r#"{"kind":"lrho_norm","rho":"inf","p":1,"d":3}"#).unwrap();
        assert!(matches!(s.kind, HomogeneousKind::LrhoNorm { rho } if rho.is_infinite()));
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(back, r#"{"kind":"lrho_norm","rho":"inf","p":1.0,"d":3}"#);
        assert!(serde_json::from_str::<HomogeneousSpec>(r#"{"kind":"max","d":2,"extra":1}"#).is_err());
        assert!(serde_json::from_str::<HomogeneousSpec>(r#"{"kind":"max","rho":2,"d":2}"#).is_err());
        let p: HomogeneousSpec = serde_json::from_str(r#"{"kind":"product","p":2,"d":2}"#).unwrap();
        assert!(matches!(p.kind, HomogeneousKind::Product));
    }

    fn builtin_specs() -> Vec<HomogeneousSpec> {
        vec![
            HomogeneousSpec::chi_square(3),
            HomogeneousSpec::lrho(1.5, 1.3, 3).unwrap(),
            HomogeneousSpec::lrho(3.0, 2.5, 2).unwrap(),
            HomogeneousSpec::lrho(f64::INFINITY, 1.0, 4).unwrap(),
            HomogeneousSpec::product(2).unwrap(),
            HomogeneousSpec::product(3).unwrap(),
            HomogeneousSpec::max(3).unwrap(),
        ]
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let x = [0.7, -0.4, 1.3, 0.2];
        for spec in builtin_specs() {
            let x = &x[..spec.d];
            let (grad, hess) = spec.derivatives(x).unwrap();
            let h = 1e-5;
            for i in 0..spec.d {
                let mut xp = x.to_vec();
                xp[i] += h;
                let mut xm = x.to_vec();
                xm[i] -= h;
                let fd = (eval_fast(&spec, &xp) - eval_fast(&spec, &xm)) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + grad[i].abs()), "{}", spec.label());
                let (gp, _) = spec.derivatives(&xp).unwrap();
                let (gm, _) = spec.derivatives(&xm).unwrap();
                for j in 0..spec.d {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd - hess[(j, i)]).abs() < 1e-5 * (1.0 + hess[(j, i)].abs()), "{}", spec.label());
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn homogeneity_holds(
            which in 0usize..7,
            raw in proptest::collection::vec(-3.0f64..3.0, 4),
            c in 0.01f64..20.0,
        ) {
            let spec = &builtin_specs()[which];
            let x = &raw[..spec.d];
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let lhs = eval_g(spec, &cx).unwrap();
            let rhs = c.powf(spec.p) * eval_g(spec, x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }
}
