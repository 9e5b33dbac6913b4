//! Exact samplers for Gaussian vectors with a fixed covariance.

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Negative circulant eigenvalues above `-EIG_TOL * max` are clipped to zero.
pub const EIG_TOL: f64 = 1e-10;
/// Jitter added to the diagonal before a dense Cholesky factorization.
pub const CHOLESKY_JITTER: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 3;

/// Circulant embedding of a stationary (Toeplitz) covariance.
pub struct CirculantSampler {
    n: usize,
    m: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler").field("n", &self.n).field("m", &self.m).finish()
    }
}

impl CirculantSampler {
    /// `cov(k)` is the covariance at lag `k` grid steps; it is evaluated up
    /// to the half-length of the embedding.
    pub fn new(n: usize, cov: &dyn Fn(usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Simulation("empty grid".into()));
        }
        let mut m = (2 * n.saturating_sub(1)).max(2).next_power_of_two();
        let mut planner = FftPlanner::new();
        for attempt in 0..=MAX_DOUBLINGS {
            let fft = planner.plan_fft_forward(m);
            let mut c: Vec<Complex64> = (0..m).map(|j| Complex64::new(cov(j.min(m - j)), 0.0)).collect();
            fft.process(&mut c);
            let max = c.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min >= -EIG_TOL * max {
                let clipped: f64 = c.iter().filter(|z| z.re < 0.0).map(|z| -z.re).sum();
                if clipped > 0.0 {
                    debug!("circulant embedding (m = {m}): clipped negative eigenvalue mass {clipped:e}");
                }
                let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Self { n, m, sqrt_eig, fft });
            }
            debug!("circulant embedding attempt {attempt} (m = {m}) has min eigenvalue {min:e}; doubling");
            m *= 2;
        }
        Err(Error::Simulation(format!("circulant embedding is not nonnegative for n = {n}")))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.m
    }

    /// Two independent samples from one complex FFT.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<Complex64>, a: &mut [f64], b: &mut [f64]) {
        scratch.clear();
        scratch.extend(self.sqrt_eig.iter().map(|&s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        }));
        self.fft.process(scratch);
        for i in 0..self.n {
            a[i] = scratch[i].re;
            b[i] = scratch[i].im;
        }
    }
}

/// Sampler `x = L z` for a dense factor `L` with `L L^T = C`.
#[derive(Debug, Clone)]
pub struct DenseSampler {
    factor: DMatrix<f64>,
}

impl DenseSampler {
    /// Cholesky factorization with a small diagonal jitter.
    pub fn cholesky(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        let jittered = cov + DMatrix::identity(n, n) * CHOLESKY_JITTER;
        match Cholesky::new(jittered) {
            Some(c) => Ok(Self { factor: c.l() }),
            None => Err(Error::Simulation(format!("Cholesky factorization of the {n}x{n} covariance failed"))),
        }
    }

    /// Nearest positive semidefinite matrix by eigenvalue clipping.
    pub fn projected(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        let eig = SymmetricEigen::new(cov);
        let clipped: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
        if clipped > 0.0 {
            let total: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
            warn!("covariance projected to PSD: clipped eigenvalue mass {clipped:e} of {total:e}");
        }
        let mut factor = eig.eigenvectors;
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        if n > 0 && !factor.iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation("non-finite covariance factor".into()));
        }
        Ok(Self { factor })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let k = self.factor.ncols();
        let z = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        let x = &self.factor * z;
        out.copy_from_slice(x.as_slice());
    }
}

/// Either sampler behind one interface.
#[derive(Debug)]
pub enum Sampler {
    Circulant(CirculantSampler),
    Dense(DenseSampler),
}

impl Sampler {
    /// Stationary covariance on `n` equispaced points: circulant embedding
    /// with a dense Cholesky fallback.
    pub fn stationary(n: usize, cov: &dyn Fn(usize) -> f64) -> Result<Self> {
        match CirculantSampler::new(n, cov) {
            Ok(c) => Ok(Sampler::Circulant(c)),
            Err(e) => {
                warn!("{e}; falling back to dense Cholesky");
                let m = DMatrix::from_fn(n, n, |i, j| cov(i.abs_diff(j)));
                DenseSampler::cholesky(m).map(Sampler::Dense).map_err(|_| {
                    Error::Simulation(format!("covariance on {n} points is numerically indefinite: embedding and Cholesky both failed"))
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sampler::Circulant(c) => c.len(),
            Sampler::Dense(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills every slice in `out` with an independent sample.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<Complex64>, out: &mut [Vec<f64>]) {
        match self {
            Sampler::Circulant(c) => {
                let mut chunks = out.chunks_mut(2);
                for pair in &mut chunks {
                    if let [a, b] = pair {
                        c.sample_pair(rng, scratch, a, b);
                    } else {
                        let mut spare = vec![0.0; c.len()];
                        c.sample_pair(rng, scratch, &mut pair[0], &mut spare);
                    }
                }
            }
            Sampler::Dense(d) => {
                for x in out.iter_mut() {
                    d.sample(rng, x);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empirical_cov(sampler: &Sampler, n_paths: usize, i: usize, j: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut scratch = Vec::new();
        let mut out = vec![vec![0.0; sampler.len()]; 2];
        let mut acc = 0.0;
        for _ in 0..n_paths / 2 {
            sampler.fill(&mut rng, &mut scratch, &mut out);
            acc += out[0][i] * out[0][j] + out[1][i] * out[1][j];
        }
        acc / n_paths as f64
    }

    #[test]
    fn circulant_reproduces_covariance() {
        let cov = |k: usize| (-0.1 * k as f64).exp();
        let s = Sampler::stationary(50, &cov).unwrap();
        assert!(matches!(s, Sampler::Circulant(_)));
        let c = empirical_cov(&s, 40_000, 3, 8);
        assert!((c - cov(5)).abs() < 0.03, "{c}");
        let v = empirical_cov(&s, 40_000, 10, 10);
        assert!((v - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn dense_paths_match_covariance() {
        let m = DMatrix::from_fn(4, 4, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
        let s = Sampler::Dense(DenseSampler::cholesky(m).unwrap());
        let c = empirical_cov(&s, 40_000, 0, 1);
        assert!((c - 0.5).abs() < 0.03);
    }

    #[test]
    fn projection_clips_negative_mass() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(DenseSampler::cholesky(m.clone()).is_err());
        let s = DenseSampler::projected(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = [0.0; 2];
        s.sample(&mut rng, &mut x);
        assert!((x[0] - x[1]).abs() < 1e-12);
    }
}
