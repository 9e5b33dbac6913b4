use super::SphereAnalysis;
use crate::error::{Error, Result};

/// Smallest `x` accepted by [`tail_asympt`] and [`pdf_asympt`]: the point
/// where `(x / g_hat)^{2/p} = 4`.
pub fn validity_floor(analysis: &SphereAnalysis) -> f64 {
    analysis.g_hat * 4f64.powf(analysis.p / 2.0)
}

fn check_floor(analysis: &SphereAnalysis, x: f64) -> Result<f64> {
    let floor = validity_floor(analysis);
    if !x.is_finite() {
        return Err(Error::Domain(format!("x = {x} is not finite")));
    }
    if x < floor {
        return Err(Error::BelowValidityFloor { x, floor });
    }
    Ok((x / analysis.g_hat).powf(2.0 / analysis.p))
}

/// `P(g(xi) > x) ~ h0 (x/g_hat)^{(m-1)/p} exp(-(x/g_hat)^{2/p} / 2)`.
pub fn tail_asympt(analysis: &SphereAnalysis, x: f64) -> Result<f64> {
    let s = check_floor(analysis, x)?;
    let m = analysis.m() as f64;
    Ok(analysis.h0 * (x / analysis.g_hat).powf((m - 1.0) / analysis.p) * (-0.5 * s).exp())
}

/// Density counterpart of [`tail_asympt`]:
/// `h0 / (p g_hat) (x/g_hat)^{(m+1)/p - 1} exp(-(x/g_hat)^{2/p} / 2)`.
pub fn pdf_asympt(analysis: &SphereAnalysis, x: f64) -> Result<f64> {
    let s = check_floor(analysis, x)?;
    let m = analysis.m() as f64;
    let p = analysis.p;
    let r = x / analysis.g_hat;
    Ok(analysis.h0 / (p * analysis.g_hat) * r.powf((m + 1.0) / p - 1.0) * (-0.5 * s).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homog::{analyze_sphere, AnalysisOptions, HomogeneousSpec};
    use crate::quad::{integrate_to_infinity, Tolerance};
    use crate::special::{normal_pdf, normal_tail};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn analysis(spec: HomogeneousSpec) -> SphereAnalysis {
        analyze_sphere(&spec, &AnalysisOptions::default()).unwrap()
    }

    #[test]
    fn chi_square_examples() {
        let a = analysis(HomogeneousSpec::chi_square(2));
        assert_relative_eq!(tail_asympt(&a, 10.0).unwrap(), (-5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(pdf_asympt(&a, 10.0).unwrap(), 0.5 * (-5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn product_example() {
        let a = analysis(HomogeneousSpec::product(2).unwrap());
        let v = tail_asympt(&a, 10.0).unwrap();
        assert_relative_eq!(v, (-10f64).exp() / (20.0 * PI).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v, 5.726e-6, max_relative = 1e-3);
    }

    #[test]
    fn max_examples() {
        let a = analysis(HomogeneousSpec::max(2).unwrap());
        let formula = tail_asympt(&a, 6.0).unwrap();
        assert_relative_eq!(formula, 2.0 / (2.0 * PI).sqrt() / 6.0 * (-18f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(formula, 2.02e-9, max_relative = 5e-3);
        let exact = 2.0 * normal_tail(6.0);
        assert_relative_eq!(exact, 1.973e-9, max_relative = 1e-3);
        assert_relative_eq!(pdf_asympt(&a, 6.0).unwrap(), 2.0 * normal_pdf(6.0), max_relative = 1e-13);
        assert_relative_eq!(2.0 * normal_pdf(6.0), 1.215e-8, max_relative = 1e-3);
    }

    #[test]
    fn floor_is_enforced() {
        let a = analysis(HomogeneousSpec::chi_square(2));
        assert!(matches!(tail_asympt(&a, 3.9), Err(Error::BelowValidityFloor { .. })));
        assert!(tail_asympt(&a, 4.0).is_ok());
        let m = analysis(HomogeneousSpec::max(2).unwrap());
        assert!(matches!(pdf_asympt(&m, 1.5), Err(Error::BelowValidityFloor { .. })));
    }

    fn specs() -> Vec<HomogeneousSpec> {
        vec![
            HomogeneousSpec::chi_square(2),
            HomogeneousSpec::chi_square(4),
            HomogeneousSpec::product(2).unwrap(),
            HomogeneousSpec::product(3).unwrap(),
            HomogeneousSpec::max(3).unwrap(),
            HomogeneousSpec::lrho(1.5, 1.0, 3).unwrap(),
        ]
    }

    #[test]
    fn tail_and_density_decrease_beyond_the_floor() {
        for spec in specs() {
            let a = analysis(spec);
            let x0 = validity_floor(&a);
            let mut prev = (f64::INFINITY, f64::INFINITY);
            for k in 0..200 {
                let x = x0 * (1.0 + 0.05 * k as f64);
                let cur = (tail_asympt(&a, x).unwrap(), pdf_asympt(&a, x).unwrap());
                assert!(cur.0 < prev.0 && cur.0 > 0.0);
                // The density may rise just above the floor when m+1 > p.
                if x > 4.0 * x0 {
                    assert!(cur.1 < prev.1);
                }
                prev = cur;
            }
        }
    }

    /// The density integrates to the tail up to relative corrections of order
    /// `1 / s`, `s = (x/g_hat)^{2/p}`; with `m = 1` the two agree exactly.
    #[test]
    fn density_integrates_to_tail() {
        let chi = analysis(HomogeneousSpec::chi_square(2));
        // 1e-6 tail level of a chi-square with two degrees of freedom.
        let x0 = 2.0 * 1e6f64.ln();
        let integral = integrate_to_infinity(|x| pdf_asympt(&chi, x).unwrap(), x0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(integral, tail_asympt(&chi, x0).unwrap(), max_relative = 1e-9);
        for spec in specs() {
            let a = analysis(spec);
            let x0 = a.g_hat * 200f64.powf(a.p / 2.0);
            let integral = integrate_to_infinity(|x| pdf_asympt(&a, x).unwrap(), x0, Tolerance::relative(1e-10)).unwrap();
            let tail = tail_asympt(&a, x0).unwrap();
            assert!((integral / tail - 1.0).abs() < 0.01, "ratio {}", integral / tail);
        }
    }
}
