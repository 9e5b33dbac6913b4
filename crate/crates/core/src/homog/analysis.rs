use std::f64::consts::PI;

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{eval_fast, HomogeneousKind, HomogeneousSpec, ManifoldParametrization};
use crate::error::{condition, Error, Result};
use crate::quad::{integrate, Tolerance};
use crate::special::sphere_area;
use crate::sphere::{self, SphericalChart};

/// Step of the central finite differences used for Hessians.
pub const FD_STEP: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-6;
const RANK_REL_THRESHOLD: f64 = 1e-6;
const CLUSTER_ARC: f64 = 1e-6;
const MANIFOLD_MIN_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Tolerance in `g` for declaring a converged point a global maximizer
    /// (relative to `max(1, g_hat)`).
    pub tol_max: f64,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { tol_max: 1e-8, n_starts: 64, seed: 0 }
    }
}

/// An isolated maximizer together with its chart data.
#[derive(Debug, Clone)]
pub struct Maximizer {
    pub point: Vec<f64>,
    pub chart: SphericalChart,
    pub phi: Vec<f64>,
    /// `J(1, phi)` in `chart`.
    pub jacobian: f64,
    /// `|det g''(phi)|` in `chart`.
    pub hessian_det: f64,
}

#[derive(Debug, Clone)]
pub enum ManifoldKind {
    /// The maximum is attained on the whole sphere (`m = d - 1`).
    WholeSphere,
    Parametrized(ManifoldParametrization),
}

#[derive(Debug, Clone)]
pub enum MaximizerSet {
    PointSet(Vec<Maximizer>),
    Manifold {
        m: usize,
        kind: ManifoldKind,
        /// `int_M dsigma / sqrt|det g''_{d-1-m}|` over the maximizer set.
        integral: f64,
        /// Sample points of the manifold with their normal Hessian determinant.
        samples: Vec<(Vec<f64>, f64)>,
    },
}

#[derive(Debug, Clone)]
pub struct SphereAnalysis {
    pub g_hat: f64,
    pub p: f64,
    pub d: usize,
    pub maximizers: MaximizerSet,
    pub h0: f64,
}

impl SphereAnalysis {
    /// Dimension of the maximizer set.
    pub fn m(&self) -> usize {
        match &self.maximizers {
            MaximizerSet::PointSet(_) => 0,
            MaximizerSet::Manifold { m, .. } => *m,
        }
    }

    pub fn points(&self) -> Option<Vec<&[f64]>> {
        match &self.maximizers {
            MaximizerSet::PointSet(pts) => Some(pts.iter().map(|m| m.point.as_slice()).collect()),
            MaximizerSet::Manifold { .. } => None,
        }
    }

    pub fn hessian_dets(&self) -> Vec<f64> {
        match &self.maximizers {
            MaximizerSet::PointSet(pts) => pts.iter().map(|m| m.hessian_det).collect(),
            MaximizerSet::Manifold { samples, .. } => samples.iter().map(|s| s.1).collect(),
        }
    }
}

/// The constant `h0` of the tail expansion.
pub fn h0(analysis: &SphereAnalysis) -> Result<f64> {
    let pg = analysis.p * analysis.g_hat;
    let d = analysis.d as f64;
    match &analysis.maximizers {
        MaximizerSet::PointSet(pts) => {
            if pts.is_empty() {
                return Err(condition("maximizer-set", "no maximizer on the sphere"));
            }
            let sum: f64 = pts.iter().map(|m| m.jacobian / m.hessian_det.sqrt()).sum();
            Ok((2.0 * PI).powf(-0.5) * pg.powf((d - 1.0) / 2.0) * sum)
        }
        MaximizerSet::Manifold { m, integral, .. } => {
            let m = *m as f64;
            Ok((2.0 * PI).powf(-(m + 1.0) / 2.0) * pg.powf((d - 1.0 - m) / 2.0) * integral)
        }
    }
}

/// Hessian of `v -> g(normalize(x + T v))` at `v = 0`, where the columns of
/// `T` are [`sphere::tangent_basis`] at `x`.
pub fn tangent_hessian(spec: &HomogeneousSpec, x: &[f64]) -> DMatrix<f64> {
    let t = sphere::tangent_basis(x);
    if let Some((_, hess)) = spec.derivatives(x) {
        let gx = eval_fast(spec, x);
        let shifted = hess - DMatrix::identity(spec.d, spec.d) * (spec.p * gx);
        return t.transpose() * shifted * &t;
    }
    let f = |v: &[f64]| {
        let mut y = x.to_vec();
        for (j, vj) in v.iter().enumerate() {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += vj * t[(k, j)];
            }
        }
        sphere::normalize(&mut y);
        eval_fast(spec, &y)
    };
    fd_hessian(&f, &vec![0.0; spec.d - 1], FD_STEP)
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, at: &[f64], h: f64) -> DMatrix<f64> {
    let n = at.len();
    let f0 = f(at);
    let mut out = DMatrix::zeros(n, n);
    let mut x = at.to_vec();
    for i in 0..n {
        x[i] = at[i] + h;
        let fp = f(&x);
        x[i] = at[i] - h;
        let fm = f(&x);
        x[i] = at[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                x[i] = at[i] + si * h;
                x[j] = at[j] + sj * h;
                let v = f(&x);
                x[i] = at[i];
                x[j] = at[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Chart Hessian of `phi -> g(chart.point(phi))`: analytic for built-in
/// kinds, central differences with step [`FD_STEP`] otherwise.
pub fn chart_hessian(spec: &HomogeneousSpec, chart: &SphericalChart, phi: &[f64]) -> DMatrix<f64> {
    let e = sphere::standard_point(phi);
    let rot = |v: DVector<f64>| match chart.rotation() {
        Some(r) => r * v,
        None => v,
    };
    let x = rot(DVector::from_vec(e));
    if let Some((grad, hess)) = spec.derivatives(x.as_slice()) {
        let dstd = sphere::standard_jacobian_matrix(phi);
        let dmat = match chart.rotation() {
            Some(r) => r * dstd,
            None => dstd,
        };
        let second = sphere::standard_second_derivatives(phi);
        // Rotate the gradient back into standard coordinates once.
        let grad_std = match chart.rotation() {
            Some(r) => r.transpose() * grad,
            None => grad,
        };
        let mut out = dmat.transpose() * hess * &dmat;
        for (k, sk) in second.iter().enumerate() {
            out += sk * grad_std[k];
        }
        return out;
    }
    fd_chart_hessian(spec, chart, phi, FD_STEP)
}

pub(crate) fn fd_chart_hessian(spec: &HomogeneousSpec, chart: &SphericalChart, phi: &[f64], h: f64) -> DMatrix<f64> {
    let f = |q: &[f64]| eval_fast(spec, &chart.point(q));
    fd_hessian(&f, phi, h)
}

/// `|det g''(phi)|` in the standard spherical chart.
pub fn hessian_det(spec: &HomogeneousSpec, phi: &[f64]) -> Result<f64> {
    hessian_det_in_chart(spec, &SphericalChart::standard(spec.d), phi)
}

/// `|det g''(phi)|` in an arbitrary (possibly rotated) chart.
pub fn hessian_det_in_chart(spec: &HomogeneousSpec, chart: &SphericalChart, phi: &[f64]) -> Result<f64> {
    if phi.len() + 1 != spec.d {
        return Err(Error::Domain(format!("expected {} angles, got {}", spec.d - 1, phi.len())));
    }
    chart.check_regular(phi)?;
    Ok(chart_hessian(spec, chart, phi).determinant().abs())
}

fn abs_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().map(|l| l.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn numeric_rank(svals: &[f64], pg: f64) -> usize {
    let scale = svals.first().copied().unwrap_or(0.0).max(pg.abs());
    svals.iter().filter(|&&s| s > RANK_REL_THRESHOLD * scale).count()
}

fn maximizer_at(spec: &HomogeneousSpec, point: Vec<f64>) -> Result<Maximizer> {
    let chart = SphericalChart::for_point(&point);
    let phi = chart.coords(&point);
    let hessian_det = hessian_det_in_chart(spec, &chart, &phi)?;
    if !(hessian_det > 0.0) {
        return Err(condition("hessian-det", format!("|det g''| = {hessian_det:e} at maximizer {point:?}")));
    }
    let jacobian = sphere::jacobian(&phi);
    Ok(Maximizer { point, chart, phi, jacobian, hessian_det })
}

fn sign_vectors(d: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << d).map(move |mask| (0..d).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
}

/// Locates the maxima of `g` on the unit sphere and computes `h0`.
pub fn analyze_sphere(spec: &HomogeneousSpec, opts: &AnalysisOptions) -> Result<SphereAnalysis> {
    spec.validate()?;
    let d = spec.d;
    let diag = 1.0 / (d as f64).sqrt();
    let unit = |i: usize, s: f64| {
        let mut e = vec![0.0; d];
        e[i] = s;
        e
    };
    let (g_hat, set) = match &spec.kind {
        HomogeneousKind::LrhoNorm { rho } if *rho == 2.0 => {
            let area = sphere_area(d);
            let set = MaximizerSet::Manifold { m: d - 1, kind: ManifoldKind::WholeSphere, integral: area, samples: vec![] };
            (spec.scale, set)
        }
        HomogeneousKind::LrhoNorm { rho } if *rho < 2.0 => {
            let pts: Vec<Vec<f64>> = sign_vectors(d).map(|s| s.iter().map(|v| v * diag).collect()).collect();
            let g_hat = spec.scale * (d as f64).powf(spec.p * (1.0 / rho - 0.5));
            (g_hat, point_set(spec, pts)?)
        }
        HomogeneousKind::LrhoNorm { .. } => {
            let pts: Vec<Vec<f64>> = (0..d).flat_map(|i| [unit(i, 1.0), unit(i, -1.0)]).collect();
            (spec.scale, point_set(spec, pts)?)
        }
        HomogeneousKind::Product => {
            let pts: Vec<Vec<f64>> =
                sign_vectors(d).filter(|s| s.iter().product::<f64>() > 0.0).map(|s| s.iter().map(|v| v * diag).collect()).collect();
            (spec.scale * (d as f64).powf(-(d as f64) / 2.0), point_set(spec, pts)?)
        }
        HomogeneousKind::Max => ((spec.scale), point_set(spec, (0..d).map(|i| unit(i, 1.0)).collect())?),
        HomogeneousKind::Custom(c) => analyze_custom(spec, c.manifold.as_ref(), opts)?,
    };
    let mut analysis = SphereAnalysis { g_hat, p: spec.p, d, maximizers: set, h0: 0.0 };
    analysis.h0 = h0(&analysis)?;
    Ok(analysis)
}

fn point_set(spec: &HomogeneousSpec, pts: Vec<Vec<f64>>) -> Result<MaximizerSet> {
    Ok(MaximizerSet::PointSet(pts.into_iter().map(|p| maximizer_at(spec, p)).collect::<Result<_>>()?))
}

fn tangent_gradient(spec: &HomogeneousSpec, x: &[f64], t: &DMatrix<f64>) -> DVector<f64> {
    let d = x.len();
    DVector::from_fn(d - 1, |j, _| {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        for k in 0..d {
            plus[k] += GRAD_STEP * t[(k, j)];
            minus[k] -= GRAD_STEP * t[(k, j)];
        }
        sphere::normalize(&mut plus);
        sphere::normalize(&mut minus);
        (eval_fast(spec, &plus) - eval_fast(spec, &minus)) / (2.0 * GRAD_STEP)
    })
}

fn move_along(x: &[f64], t: &DMatrix<f64>, v: &DVector<f64>) -> Vec<f64> {
    let mut y = x.to_vec();
    let shift = t * v;
    for (yk, s) in y.iter_mut().zip(shift.iter()) {
        *yk += s;
    }
    sphere::normalize(&mut y);
    y
}

/// Riemannian gradient ascent followed by Newton polishing on the
/// non-degenerate directions of the Hessian.
fn ascend(spec: &HomogeneousSpec, start: Vec<f64>) -> Vec<f64> {
    let mut x = start;
    let mut fx = eval_fast(spec, &x);
    let mut eta = 0.1;
    for _ in 0..500 {
        let t = sphere::tangent_basis(&x);
        let g = tangent_gradient(spec, &x, &t);
        if g.norm() < 1e-7 * (1.0 + fx.abs()) {
            break;
        }
        let y = move_along(&x, &t, &(&g * eta));
        let fy = eval_fast(spec, &y);
        if fy > fx {
            x = y;
            fx = fy;
            eta = (eta * 1.5).min(10.0);
        } else {
            eta *= 0.5;
            if eta < 1e-14 {
                break;
            }
        }
    }
    for _ in 0..40 {
        let t = sphere::tangent_basis(&x);
        let g = tangent_gradient(spec, &x, &t);
        let a = tangent_hessian(spec, &x);
        let eig = SymmetricEigen::new(a);
        let scale = eig.eigenvalues.iter().fold(spec.p * fx.abs(), |m, l| m.max(l.abs()));
        let thr = RANK_REL_THRESHOLD * scale;
        if eig.eigenvalues.iter().any(|&l| l > thr) {
            break;
        }
        let mut step = DVector::zeros(spec.d - 1);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l < -thr {
                let u = eig.eigenvectors.column(i);
                step -= u * (u.dot(&g) / l);
            }
        }
        let y = move_along(&x, &t, &step);
        let fy = eval_fast(spec, &y);
        if fy < fx - 1e-15 * fx.abs() {
            break;
        }
        x = y;
        fx = fy;
        if step.norm() < 1e-13 {
            break;
        }
    }
    x
}

fn analyze_custom(
    spec: &HomogeneousSpec,
    manifold: Option<&ManifoldParametrization>,
    opts: &AnalysisOptions,
) -> Result<(f64, MaximizerSet)> {
    let d = spec.d;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.n_starts.max(1)).map(|_| sphere::random_point(d, &mut rng)).collect();
    let ends: Vec<(Vec<f64>, f64)> = starts
        .into_iter()
        .map(|s| {
            let x = ascend(spec, s);
            let fx = eval_fast(spec, &x);
            (x, fx)
        })
        .collect();
    let g_hat = ends.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    if !(g_hat > 0.0) {
        return Err(condition("positivity", format!("maximum of g on the sphere is {g_hat}")));
    }
    let tol = opts.tol_max * g_hat.max(1.0);
    let near: Vec<Vec<f64>> = ends.into_iter().filter(|e| g_hat - e.1 <= tol).map(|e| e.0).collect();
    let pg = spec.p * g_hat;
    let ranks: Vec<usize> = near.iter().map(|x| numeric_rank(&abs_eigenvalues(&tangent_hessian(spec, x)), pg)).collect();
    let rank = ranks[0];
    if ranks.iter().any(|&r| r != rank) {
        return Err(condition(
            "rank-consistency",
            format!("Hessian ranks {ranks:?} differ across maximizers; mixed maximizer sets are not supported"),
        ));
    }
    debug!("custom analysis: g_hat = {g_hat}, {} near-maximal points of rank {rank}", near.len());
    if rank == d - 1 {
        if manifold.is_some() {
            return Err(condition("manifold-parametrization", "a manifold was supplied but the maxima are isolated"));
        }
        let mut reps: Vec<Vec<f64>> = Vec::new();
        for x in near {
            if !reps.iter().any(|r| sphere::arc_distance(r, &x) <= CLUSTER_ARC) {
                reps.push(x);
            }
        }
        return Ok((g_hat, point_set(spec, reps)?));
    }
    let m = d - 1 - rank;
    if m == d - 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
        for _ in 0..64 {
            let x = sphere::random_point(d, &mut rng);
            let gx = eval_fast(spec, &x);
            if (gx - g_hat).abs() > tol {
                return Err(condition("rank", format!("Hessian vanishes at the maxima but g({x:?}) = {gx} differs from g_hat = {g_hat}")));
            }
        }
        let set = MaximizerSet::Manifold { m, kind: ManifoldKind::WholeSphere, integral: sphere_area(d), samples: vec![] };
        return Ok((g_hat, set));
    }
    if near.len() < MANIFOLD_MIN_SAMPLES {
        return Err(condition(
            "manifold-samples",
            format!("only {} near-maximal points of rank {rank}; at least {MANIFOLD_MIN_SAMPLES} are required", near.len()),
        ));
    }
    let mp = manifold.ok_or_else(|| {
        condition(
            "manifold-parametrization",
            format!("maximizer set has dimension m = {m}; supply a parametrization of the maximizer manifold"),
        )
    })?;
    if mp.m != m {
        return Err(condition("manifold-parametrization", format!("parametrization has m = {}, detected m = {m}", mp.m)));
    }
    let samples = manifold_samples(spec, mp, g_hat, tol, rank)?;
    let integral = manifold_integral(spec, mp, rank)?;
    let set = MaximizerSet::Manifold { m, kind: ManifoldKind::Parametrized(mp.clone()), integral, samples };
    Ok((g_hat, set))
}

fn normal_det(spec: &HomogeneousSpec, x: &[f64], rank: usize) -> f64 {
    abs_eigenvalues(&tangent_hessian(spec, x)).iter().take(rank).product()
}

fn manifold_samples(
    spec: &HomogeneousSpec,
    mp: &ManifoldParametrization,
    g_hat: f64,
    tol: f64,
    rank: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let per_axis = 6usize;
    let total = per_axis.pow(mp.m as u32);
    let pg = spec.p * g_hat;
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let theta: Vec<f64> = (0..mp.m)
            .map(|k| {
                let i = rest % per_axis;
                rest /= per_axis;
                mp.lower[k] + (mp.upper[k] - mp.lower[k]) * (i as f64 + 0.5) / per_axis as f64
            })
            .collect();
        let x = mp.point(&theta);
        let gx = eval_fast(spec, &x);
        if (gx - g_hat).abs() > tol {
            return Err(condition("manifold-parametrization", format!("g = {gx} at parametrized point {x:?}, g_hat = {g_hat}")));
        }
        let sv = abs_eigenvalues(&tangent_hessian(spec, &x));
        if numeric_rank(&sv, pg) != rank {
            return Err(condition("rank", format!("Hessian rank at {x:?} differs from {rank}")));
        }
        out.push((x, sv.iter().take(rank).product()));
    }
    Ok(out)
}

/// Surface element of the parametrization times `1 / sqrt|det g''_normal|`.
fn manifold_density(spec: &HomogeneousSpec, mp: &ManifoldParametrization, rank: usize, theta: &[f64]) -> f64 {
    let h = 1e-6;
    let d = spec.d;
    let mut g = DMatrix::zeros(d, mp.m);
    let mut th = theta.to_vec();
    for j in 0..mp.m {
        th[j] = theta[j] + h;
        let xp = mp.point(&th);
        th[j] = theta[j] - h;
        let xm = mp.point(&th);
        th[j] = theta[j];
        for k in 0..d {
            g[(k, j)] = (xp[k] - xm[k]) / (2.0 * h);
        }
    }
    let area = (g.transpose() * &g).determinant().abs().sqrt();
    let x = mp.point(theta);
    area / normal_det(spec, &x, rank).sqrt()
}

fn integrate_box(f: &dyn Fn(&[f64]) -> f64, lower: &[f64], upper: &[f64], prefix: &mut Vec<f64>, rel: f64) -> Result<f64> {
    let k = prefix.len();
    if k + 1 == lower.len() {
        let g = |t: f64| {
            let mut th = prefix.clone();
            th.push(t);
            f(&th)
        };
        return integrate(g, lower[k], upper[k], Tolerance::relative(rel));
    }
    let inner_rel = rel * 1e-2;
    let err = std::cell::RefCell::new(None);
    let g = |t: f64| {
        let mut th = prefix.clone();
        th.push(t);
        match integrate_box(f, lower, upper, &mut th, inner_rel) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let v = integrate(g, lower[k], upper[k], Tolerance::relative(rel))?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn manifold_integral(spec: &HomogeneousSpec, mp: &ManifoldParametrization, rank: usize) -> Result<f64> {
    let f = |theta: &[f64]| manifold_density(spec, mp, rank, theta);
    integrate_box(&f, &mp.lower, &mp.upper, &mut Vec::new(), 1e-8)
}
