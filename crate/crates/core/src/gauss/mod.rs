//! Seeded simulation of fractional Brownian motion and of the Gaussian
//! processes driving a chaos process, on uniform time grids.

mod sampler;

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::NamedFn;
use crate::homog::HomogeneousSpec;

pub use sampler::{CirculantSampler, DenseSampler, Sampler, CHOLESKY_JITTER, EIG_TOL};

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        let g = Self { t_start, t_end, n_points };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[0, t_end]` with step as close as possible to (and not
    /// larger than) `step`.
    pub fn with_step(t_end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && t_end > 0.0) {
            return Err(Error::InvalidSpec(format!("grid needs positive horizon and step, got {t_end} and {step}")));
        }
        let intervals = (t_end / step - 1e-9).ceil().max(1.0) as usize;
        Self::new(0.0, t_end, intervals + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(Error::InvalidSpec(format!("grid needs t_end > t_start, got [{}, {}]", self.t_start, self.t_end)));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidSpec(format!("grid needs at least 2 points, got {}", self.n_points)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_points - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j + 1 == self.n_points {
            self.t_end
        } else {
            self.t_start + (self.t_end - self.t_start) * j as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.time(j)).collect()
    }
}

/// Correlation structure of each coordinate process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationSpec {
    /// `r(t) = exp(-a |t|^alpha)`.
    StationaryExp { a: f64, alpha: f64 },
    /// `r(s, t) = exp(-a((s + t)/2) |t - s|^alpha)`.
    LocallyStationary { a_fn: NamedFn, alpha: f64 },
    /// Explicit covariance matrix on the simulation grid.
    CustomPsdMatrix { matrix: Vec<Vec<f64>> },
}

impl CorrelationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match self {
            CorrelationSpec::StationaryExp { a, alpha } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return bad(format!("correlation scale a must be positive, got {a}"));
                }
                check_alpha(*alpha)
            }
            CorrelationSpec::LocallyStationary { a_fn, alpha } => {
                a_fn.validate()?;
                check_alpha(*alpha)
            }
            CorrelationSpec::CustomPsdMatrix { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|row| row.len() != n) {
                    return bad("custom covariance must be a non-empty square matrix".into());
                }
                for i in 0..n {
                    if (matrix[i][i] - 1.0).abs() > 1e-12 {
                        return bad(format!("custom covariance must have unit diagonal, entry {i} is {}", matrix[i][i]));
                    }
                    for j in 0..i {
                        if matrix[i][j] != matrix[j][i] || !matrix[i][j].is_finite() {
                            return bad(format!("custom covariance is not symmetric at ({i}, {j})"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            CorrelationSpec::StationaryExp { alpha, .. } | CorrelationSpec::LocallyStationary { alpha, .. } => Some(*alpha),
            CorrelationSpec::CustomPsdMatrix { .. } => None,
        }
    }

    /// `a(t)`; constant for the stationary form.
    pub fn a_at(&self, t: f64) -> Option<f64> {
        match self {
            CorrelationSpec::StationaryExp { a, .. } => Some(*a),
            CorrelationSpec::LocallyStationary { a_fn, .. } => Some(a_fn.eval(t)),
            CorrelationSpec::CustomPsdMatrix { .. } => None,
        }
    }

    /// Correlation of the unit-variance process at times `s`, `t`.
    pub fn correlation(&self, s: f64, t: f64) -> Option<f64> {
        match self {
            CorrelationSpec::StationaryExp { a, alpha } => Some((-a * (t - s).abs().powf(*alpha)).exp()),
            CorrelationSpec::LocallyStationary { a_fn, alpha } => Some((-a_fn.eval(0.5 * (s + t)) * (t - s).abs().powf(*alpha)).exp()),
            CorrelationSpec::CustomPsdMatrix { .. } => None,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("alpha must lie in (0, 2], got {alpha}")))
    }
}

/// Standard deviation profile `sigma(t)` of each coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceSpec {
    Unit,
    /// With `x = b |t - t0|^beta`: `sigma = 1 - x` for `x <= 1/2` and
    /// `sigma = exp(1 - 2x) / 2` beyond, a positive `C^1` continuation that
    /// stays below one.
    LocalPower {
        b: f64,
        beta: f64,
        t0: f64,
    },
}

impl VarianceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            VarianceSpec::Unit => Ok(()),
            VarianceSpec::LocalPower { b, beta, t0 } => {
                if *b > 0.0 && *beta > 0.0 && b.is_finite() && beta.is_finite() && t0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("variance needs b > 0 and beta > 0, got b = {b}, beta = {beta}")))
                }
            }
        }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        match self {
            VarianceSpec::Unit => 1.0,
            VarianceSpec::LocalPower { b, beta, t0 } => {
                let x = b * (t - t0).abs().powf(*beta);
                if x <= 0.5 {
                    1.0 - x
                } else {
                    0.5 * (1.0 - 2.0 * x).exp()
                }
            }
        }
    }
}

/// A sampled trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed_used: u64,
}

/// Covariance of fractional Gaussian noise with step `delta` at lag `k`.
pub fn fgn_cov(alpha: f64, delta: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = |x: f64| x.abs().powf(alpha);
    0.5 * delta.powf(alpha) * (p(k + 1.0) - 2.0 * p(k) + p(k - 1.0))
}

/// Reusable exact sampler of `B_alpha` on `n` grid points `0, delta, ..`.
#[derive(Debug)]
pub struct FbmSampler {
    increments: Sampler,
    n: usize,
}

impl FbmSampler {
    pub fn new(alpha: f64, delta: f64, n: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if n < 2 || !(delta > 0.0) {
            return Err(Error::InvalidSpec(format!("fBm grid needs n >= 2 and delta > 0, got n = {n}, delta = {delta}")));
        }
        let increments = Sampler::stationary(n - 1, &|k| fgn_cov(alpha, delta, k))?;
        Ok(Self { increments, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fills every path in `out` (each of length `n`) with an independent fBm sample.
    pub fn fill<R: rand::Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<rustfft::num_complex::Complex64>, out: &mut [Vec<f64>]) {
        let mut incs: Vec<Vec<f64>> = vec![vec![0.0; self.n - 1]; out.len()];
        self.increments.fill(rng, scratch, &mut incs);
        for (path, inc) in out.iter_mut().zip(&incs) {
            path[0] = 0.0;
            let mut acc = 0.0;
            for (j, v) in inc.iter().enumerate() {
                acc += v;
                path[j + 1] = acc;
            }
        }
    }
}

/// One fBm path on a grid starting at 0.
pub fn simulate_fbm(alpha: f64, grid: &GridSpec, seed: u64) -> Result<GridPath> {
    grid.validate()?;
    if grid.t_start != 0.0 {
        return Err(Error::Precondition(format!("fBm grids start at 0, got {}", grid.t_start)));
    }
    let s = FbmSampler::new(alpha, grid.step(), grid.n_points)?;
    let mut rng = stream_rng(seed, 0);
    let mut out = vec![vec![0.0; grid.n_points]];
    s.fill(&mut rng, &mut Vec::new(), &mut out);
    Ok(GridPath { grid: *grid, values: out.pop().expect("one path"), seed_used: seed })
}

/// Builds the sampler of the unit-variance coordinate process on `grid`.
pub fn unit_sampler(corr: &CorrelationSpec, grid: &GridSpec) -> Result<Sampler> {
    corr.validate()?;
    grid.validate()?;
    let n = grid.n_points;
    match corr {
        CorrelationSpec::StationaryExp { a, alpha } => {
            let step = grid.step();
            Sampler::stationary(n, &|k| (-a * (k as f64 * step).powf(*alpha)).exp())
        }
        CorrelationSpec::LocallyStationary { .. } => {
            let times = grid.times();
            let m = DMatrix::from_fn(n, n, |i, j| corr.correlation(times[i], times[j]).expect("analytic form"));
            match DenseSampler::cholesky(m.clone()) {
                Ok(s) => Ok(Sampler::Dense(s)),
                Err(_) => Ok(Sampler::Dense(DenseSampler::projected(m)?)),
            }
        }
        CorrelationSpec::CustomPsdMatrix { matrix } => {
            if matrix.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "custom covariance is {}x{} but the grid has {n} points",
                    matrix.len(),
                    matrix.len()
                )));
            }
            let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            Ok(Sampler::Dense(DenseSampler::cholesky(m)?))
        }
    }
}

/// One centered unit-variance stationary path with `r(t) = exp(-a|t|^alpha)`.
pub fn simulate_stationary(corr: &CorrelationSpec, grid: &GridSpec, seed: u64) -> Result<GridPath> {
    if !matches!(corr, CorrelationSpec::StationaryExp { .. }) {
        return Err(Error::Applicability("simulate_stationary needs a stationary_exp correlation".into()));
    }
    let s = unit_sampler(corr, grid)?;
    let mut rng = stream_rng(seed, 0);
    let mut out = vec![vec![0.0; grid.n_points]];
    s.fill(&mut rng, &mut Vec::new(), &mut out);
    Ok(GridPath { grid: *grid, values: out.pop().expect("one path"), seed_used: seed })
}

/// `d` independent coordinate paths `sigma(t) * Z_i(t)`; coordinate `i` uses
/// the generator stream `i` of `seed`.
pub fn simulate_vector(d: usize, corr: &CorrelationSpec, var: &VarianceSpec, grid: &GridSpec, seed: u64) -> Result<Vec<GridPath>> {
    var.validate()?;
    let s = unit_sampler(corr, grid)?;
    let sigma: Vec<f64> = grid.times().iter().map(|&t| var.sigma(t)).collect();
    let mut scratch = Vec::new();
    (0..d)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut out = vec![vec![0.0; grid.n_points]];
            s.fill(&mut rng, &mut scratch, &mut out);
            let values = out[0].iter().zip(&sigma).map(|(z, s)| z * s).collect();
            Ok(GridPath { grid: *grid, values, seed_used: seed })
        })
        .collect()
}

/// Pointwise `g(X_1(t), .., X_d(t))`.
pub fn chaos_path(spec: &HomogeneousSpec, paths: &[GridPath]) -> Result<GridPath> {
    if paths.len() != spec.d {
        return Err(Error::Domain(format!("expected {} component paths, got {}", spec.d, paths.len())));
    }
    let grid = paths[0].grid;
    if paths.iter().any(|p| p.grid != grid || p.values.len() != grid.n_points) {
        return Err(Error::Domain("component paths live on different grids".into()));
    }
    let mut x = vec![0.0; spec.d];
    let values = (0..grid.n_points)
        .map(|j| {
            for (xi, p) in x.iter_mut().zip(paths) {
                *xi = p.values[j];
            }
            crate::homog::eval_g(spec, &x)
        })
        .collect::<Result<_>>()?;
    Ok(GridPath { grid, values, seed_used: paths[0].seed_used })
}

/// Writes `comp_<i>.csv` (header `t,value`) for each component into `dir`.
pub fn dump_paths(dir: &Path, paths: &[GridPath]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, p) in paths.iter().enumerate() {
        let mut body = String::from("t,value\n");
        for (j, v) in p.values.iter().enumerate() {
            body.push_str(&format!("{},{}\n", p.grid.time(j), v));
        }
        fs::File::create(dir.join(format!("comp_{i}.csv")))?.write_all(body.as_bytes())?;
    }
    Ok(())
}
