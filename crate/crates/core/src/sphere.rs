//! Spherical coordinates on the unit sphere of `R^d`.
//!
//! Standard chart, for `phi = (phi_1, .., phi_{d-1})`:
//!
//! ```text
//! x_1 = cos phi_1
//! x_k = sin phi_1 .. sin phi_{k-1} cos phi_k      (1 < k < d)
//! x_d = sin phi_1 .. sin phi_{d-1}
//! ```
//!
//! with volume element `J(1, phi) = sin^{d-2} phi_1 .. sin phi_{d-2}`. The
//! chart degenerates where one of `sin phi_1 .. sin phi_{d-2}` vanishes; a
//! [`SphericalChart`] may carry an orthogonal rotation so that a point of
//! interest sits far from those poles.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Charts are rotated when any `sin phi_i` (i <= d-2) drops below this.
pub const POLE_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy)]
enum Factor {
    One,
    Sin,
    Cos,
}

impl Factor {
    fn value(self, x: f64, order: u8) -> f64 {
        match (self, order % 4) {
            (Factor::One, 0) => 1.0,
            (Factor::One, _) => 0.0,
            (Factor::Sin, 0) => x.sin(),
            (Factor::Sin, 1) => x.cos(),
            (Factor::Sin, 2) => -x.sin(),
            (Factor::Sin, _) => -x.cos(),
            (Factor::Cos, 0) => x.cos(),
            (Factor::Cos, 1) => -x.sin(),
            (Factor::Cos, 2) => -x.cos(),
            (Factor::Cos, _) => x.sin(),
        }
    }
}

fn factor(d: usize, k: usize, j: usize) -> Factor {
    // k: coordinate index 0..d, j: angle index 0..d-1
    if k == d - 1 || j < k {
        Factor::Sin
    } else if j == k {
        Factor::Cos
    } else {
        Factor::One
    }
}

/// Coordinate `k` of the standard chart with angle `j` differentiated
/// `orders[j]` times.
fn coordinate(phi: &[f64], k: usize, orders: &[u8]) -> f64 {
    let d = phi.len() + 1;
    phi.iter().enumerate().map(|(j, &x)| factor(d, k, j).value(x, orders[j])).product()
}

/// Point of the standard chart.
pub fn standard_point(phi: &[f64]) -> Vec<f64> {
    let d = phi.len() + 1;
    let zeros = vec![0u8; d - 1];
    (0..d).map(|k| coordinate(phi, k, &zeros)).collect()
}

/// First derivatives `D[k][i] = d x_k / d phi_i` of the standard chart.
pub fn standard_jacobian_matrix(phi: &[f64]) -> DMatrix<f64> {
    let d = phi.len() + 1;
    let mut orders = vec![0u8; d - 1];
    DMatrix::from_fn(d, d - 1, |k, i| {
        orders[i] = 1;
        let v = coordinate(phi, k, &orders);
        orders[i] = 0;
        v
    })
}

/// Second derivatives of the standard chart: entry `[k]` is the
/// `(d-1) x (d-1)` matrix of `d^2 x_k / d phi_i d phi_l`.
pub fn standard_second_derivatives(phi: &[f64]) -> Vec<DMatrix<f64>> {
    let d = phi.len() + 1;
    let mut orders = vec![0u8; d - 1];
    (0..d)
        .map(|k| {
            DMatrix::from_fn(d - 1, d - 1, |i, l| {
                orders[i] += 1;
                orders[l] += 1;
                let v = coordinate(phi, k, &orders);
                orders[i] -= 1;
                orders[l] -= 1;
                v
            })
        })
        .collect()
}

/// Angles of a unit vector in the standard chart, with `phi_i in [0, pi]`
/// for `i < d-1` and `phi_{d-1} in [0, 2 pi)`.
pub fn standard_coords(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut phi = vec![0.0; d - 1];
    for k in 0..d - 2 {
        let tail: f64 = x[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        phi[k] = if tail > 0.0 { (x[k] / tail).clamp(-1.0, 1.0).acos() } else { 0.0 };
    }
    let mut last = x[d - 1].atan2(x[d - 2]);
    if last < 0.0 {
        last += 2.0 * PI;
    }
    phi[d - 2] = last;
    phi
}

/// `J(1, phi)`.
pub fn jacobian(phi: &[f64]) -> f64 {
    let d = phi.len() + 1;
    (0..d.saturating_sub(2)).map(|i| phi[i].sin().powi((d - 2 - i) as i32)).product()
}

/// Returns the first `sin phi_i` (i <= d-2) below `threshold`, if any.
pub fn pole_proximity(phi: &[f64], threshold: f64) -> Option<(usize, f64)> {
    let d = phi.len() + 1;
    (0..d.saturating_sub(2)).map(|i| (i + 1, phi[i].sin().abs())).find(|(_, s)| *s < threshold)
}

/// Standard chart optionally composed with an orthogonal rotation:
/// `x = R * standard_point(phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalChart {
    d: usize,
    rotation: Option<DMatrix<f64>>,
}

impl SphericalChart {
    pub fn standard(d: usize) -> Self {
        Self { d, rotation: None }
    }

    /// Chart that places `x` at a point where every `sin phi_i` equals one.
    /// The rotation is the Householder reflection swapping `x` and that point.
    pub fn centered_on(x: &[f64]) -> Self {
        let d = x.len();
        let mut target_phi = vec![FRAC_PI_2; d - 1];
        target_phi[d - 2] = FRAC_PI_4;
        let q = DVector::from_vec(standard_point(&target_phi));
        let xv = DVector::from_column_slice(x);
        let v = &q - &xv;
        let norm2 = v.norm_squared();
        if norm2 < 1e-30 {
            return Self { d, rotation: None };
        }
        let r = DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / norm2);
        Self { d, rotation: Some(r) }
    }

    /// Standard chart when `x` is away from its poles, a rotated one otherwise.
    pub fn for_point(x: &[f64]) -> Self {
        let phi = standard_coords(x);
        match pole_proximity(&phi, POLE_THRESHOLD) {
            None => Self::standard(x.len()),
            Some(_) => Self::centered_on(x),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_rotated(&self) -> bool {
        self.rotation.is_some()
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn point(&self, phi: &[f64]) -> Vec<f64> {
        let p = standard_point(phi);
        match &self.rotation {
            None => p,
            Some(r) => (r * DVector::from_vec(p)).as_slice().to_vec(),
        }
    }

    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        match &self.rotation {
            None => standard_coords(x),
            Some(r) => {
                let y = r.transpose() * DVector::from_column_slice(x);
                standard_coords(y.as_slice())
            }
        }
    }

    /// Errors when `phi` is too close to a pole of the chart.
    pub fn check_regular(&self, phi: &[f64]) -> Result<()> {
        match pole_proximity(phi, POLE_THRESHOLD) {
            None => Ok(()),
            Some((index, sin_value)) => Err(Error::ChartSingular { index, sin_value }),
        }
    }
}

/// Orthonormal basis (as columns, `d x (d-1)`) of the tangent space at `x`.
pub fn tangent_basis(x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let s = if x[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut w = DVector::from_column_slice(x);
    w[0] -= s;
    let norm2 = w.norm_squared();
    let h = DMatrix::identity(d, d) - (&w * w.transpose()) * (2.0 / norm2);
    h.columns(1, d - 1).into_owned()
}

pub fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

/// Uniform random point on the unit sphere.
pub fn random_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2 > 1e-20 {
            normalize(&mut x);
            return x;
        }
    }
}

pub fn arc_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn chart_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for d in 2..6 {
            for _ in 0..20 {
                let x = random_point(d, &mut rng);
                let phi = standard_coords(&x);
                let y = standard_point(&phi);
                for (a, b) in x.iter().zip(&y) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_metric_determinant() {
        let phi = [0.7, 1.1, 2.5];
        let dmat = standard_jacobian_matrix(&phi);
        let metric = dmat.transpose() * &dmat;
        assert_relative_eq!(metric.determinant().sqrt(), jacobian(&phi), max_relative = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let phi = vec![0.9, 0.4, 4.0];
        let h = 1e-6;
        let dmat = standard_jacobian_matrix(&phi);
        let second = standard_second_derivatives(&phi);
        for i in 0..3 {
            let mut p = phi.clone();
            p[i] += h;
            let xp = standard_point(&p);
            p[i] -= 2.0 * h;
            let xm = standard_point(&p);
            for k in 0..4 {
                assert!(((xp[k] - xm[k]) / (2.0 * h) - dmat[(k, i)]).abs() < 1e-8);
            }
            let mut p = phi.clone();
            p[i] += h;
            let dp = standard_jacobian_matrix(&p);
            p[i] -= 2.0 * h;
            let dm = standard_jacobian_matrix(&p);
            for k in 0..4 {
                for l in 0..3 {
                    let fd = (dp[(k, l)] - dm[(k, l)]) / (2.0 * h);
                    assert!((fd - second[k][(l, i)]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rotated_chart_moves_point_off_the_pole() {
        let x = [1.0, 0.0, 0.0];
        assert!(pole_proximity(&standard_coords(&x), POLE_THRESHOLD).is_some());
        let chart = SphericalChart::for_point(&x);
        assert!(chart.is_rotated());
        let phi = chart.coords(&x);
        chart.check_regular(&phi).unwrap();
        let back = chart.point(&phi);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let x = [0.6, 0.0, -0.8];
        let t = tangent_basis(&x);
        let xv = DVector::from_column_slice(&x);
        assert!((t.transpose() * &xv).norm() < 1e-14);
        let g = t.transpose() * &t;
        assert!((g - DMatrix::identity(2, 2)).norm() < 1e-14);
    }
}
