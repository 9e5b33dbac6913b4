//! Pickands constant estimation on a ladder of horizons `S` and grid steps
//! `delta`, all cells sharing the same simulated fBm paths.
//!
//! Two per-replicate estimators of `H_alpha[0,S] = E sup_{t in G} exp(sqrt(2) B(t) - t^alpha)`,
//! `G = delta Z ∩ [0,S]` with `N` points, are available:
//!
//! * `Plain`: the supremum itself.
//! * `ShiftRatio`: `N / sum_{t in G} exp(W(t) - max_G W)` with
//!   `W(t) = sqrt(2) (B(t) - B(tau)) - |t - tau|^alpha` and `tau` uniform on
//!   `G`. It has the same mean and is bounded by `N`, while the plain
//!   supremum has a tail of order `1/y`.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_and_se, steps, ConstantEstimate};
use crate::error::{Error, Result};
use crate::gauss::{check_alpha, stream_rng, FbmSampler};

const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickandsEstimator {
    #[default]
    ShiftRatio,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PickandsOptions {
    pub s_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub n_rep: usize,
    pub seed: u64,
    pub estimator: PickandsEstimator,
}

impl Default for PickandsOptions {
    fn default() -> Self {
        Self {
            s_list: vec![32.0, 64.0, 128.0],
            delta_list: vec![0.2, 0.1, 0.05],
            n_rep: 20_000,
            seed: 0,
            estimator: PickandsEstimator::ShiftRatio,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderCell {
    pub s: f64,
    pub delta: f64,
    /// Estimate of `H_alpha[0,S]` on the grid of step `delta`.
    pub estimate: ConstantEstimate,
}

/// All ladder cells with their per-replicate values.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub alpha: f64,
    pub cells: Vec<LadderCell>,
    pub n_rep: usize,
    /// Row-major `n_rep x cells.len()`.
    samples: Vec<f64>,
}

impl Ladder {
    pub fn cell(&self, s: f64, delta: f64) -> Option<&LadderCell> {
        self.cells.iter().find(|c| c.s == s && c.delta == delta)
    }

    /// Per-replicate values of cell `idx`, in replicate order.
    pub fn replicate_values(&self, idx: usize) -> Vec<f64> {
        let k = self.cells.len();
        (0..self.n_rep).map(|r| self.samples[r * k + idx]).collect()
    }
}

struct CellPlan {
    s: f64,
    delta: f64,
    stride: usize,
    n: usize,
    lag: Vec<f64>,
}

fn cell_value<R: rand::Rng + ?Sized>(path: &[f64], plan: &CellPlan, estimator: PickandsEstimator, rng: &mut R) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    match estimator {
        PickandsEstimator::Plain => {
            let m = (0..plan.n).map(|j| sqrt2 * path[j * plan.stride] - plan.lag[j]).fold(f64::NEG_INFINITY, f64::max);
            m.exp()
        }
        PickandsEstimator::ShiftRatio => {
            let tau = rng.random_range(0..plan.n);
            let base = path[tau * plan.stride];
            let w = |j: usize| sqrt2 * (path[j * plan.stride] - base) - plan.lag[j.abs_diff(tau)];
            let m = (0..plan.n).map(w).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (0..plan.n).map(|j| (w(j) - m).exp()).sum();
            plan.n as f64 / sum
        }
    }
}

/// Estimates `H_alpha[0,S]` for every `(S, delta)` pair with common random
/// numbers: one fBm path per replicate on the finest grid up to the largest
/// horizon, subsampled for each cell. Every `delta` must be a multiple of the
/// smallest one and must divide every `S`.
pub fn pickands_ladder(
    alpha: f64,
    s_list: &[f64],
    delta_list: &[f64],
    n_rep: usize,
    seed: u64,
    estimator: PickandsEstimator,
) -> Result<Ladder> {
    check_alpha(alpha)?;
    if s_list.is_empty() || delta_list.is_empty() {
        return Err(Error::InvalidSpec("ladders of S and delta must be non-empty".into()));
    }
    if n_rep < 2 {
        return Err(Error::Precondition(format!("need at least 2 replicates, got {n_rep}")));
    }
    let d_min = delta_list.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = s_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(d_min > 0.0) || s_list.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidSpec("ladder entries must be positive".into()));
    }
    let mut plans = Vec::new();
    for &s in s_list {
        for &delta in delta_list {
            let stride = steps(delta, d_min)?;
            let k = steps(s, delta)?;
            let lag = (0..=k).map(|j| (j as f64 * delta).powf(alpha)).collect();
            plans.push(CellPlan { s, delta, stride, n: k + 1, lag });
        }
    }
    let n_max = steps(s_max, d_min)? + 1;
    let sampler = FbmSampler::new(alpha, d_min, n_max)?;
    let n_chunks = n_rep.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let reps = CHUNK.min(n_rep - c * CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            let mut paths = vec![vec![0.0; n_max]; reps];
            sampler.fill(&mut rng, &mut Vec::new(), &mut paths);
            let mut out = Vec::with_capacity(reps * plans.len());
            for path in &paths {
                for plan in &plans {
                    out.push(cell_value(path, plan, estimator, &mut rng));
                }
            }
            out
        })
        .collect();
    let samples: Vec<f64> = chunks.into_iter().flatten().collect();
    let k = plans.len();
    let cells = plans
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let vals: Vec<f64> = (0..n_rep).map(|r| samples[r * k + i]).collect();
            let (value, std_error) = mean_and_se(&vals);
            LadderCell {
                s: plan.s,
                delta: plan.delta,
                estimate: ConstantEstimate {
                    value,
                    std_error,
                    n_rep,
                    delta: plan.delta,
                    horizon: plan.s,
                    extrapolated: false,
                    warnings: vec![],
                },
            }
        })
        .collect();
    Ok(Ladder { alpha, cells, n_rep, samples })
}

/// Estimate of `H_alpha[0,S]` (not divided by `S`) on the grid `delta Z ∩ [0,S]`.
pub fn pickands_finite(alpha: f64, s: f64, delta: f64, n_rep: usize, seed: u64, estimator: PickandsEstimator) -> Result<ConstantEstimate> {
    let ladder = pickands_ladder(alpha, &[s], &[delta], n_rep, seed, estimator)?;
    Ok(ladder.cells[0].estimate.clone())
}

/// Least-squares intercept weights for values observed at abscissae `x`.
fn intercept_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    if x.len() == 1 {
        return vec![1.0];
    }
    let mean = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    x.iter().map(|v| 1.0 / n - mean * (v - mean) / sxx).collect()
}

/// `H_alpha` from the ladder: for each `S`, `H_alpha[0,S]/S` is extrapolated
/// to `delta = 0` linearly in `delta^{alpha/2}` (least squares), and the
/// intercepts of the two largest `S` are averaged. The standard error comes
/// from the per-replicate linear combination, so the correlation between
/// cells is accounted for.
pub fn pickands(alpha: f64, opts: &PickandsOptions) -> Result<ConstantEstimate> {
    pickands_with_ladder(alpha, opts).map(|(e, _)| e)
}

/// [`pickands`] together with the ladder it was extrapolated from.
pub fn pickands_with_ladder(alpha: f64, opts: &PickandsOptions) -> Result<(ConstantEstimate, Ladder)> {
    let ladder = pickands_ladder(alpha, &opts.s_list, &opts.delta_list, opts.n_rep, opts.seed, opts.estimator)?;
    let mut s_sorted = opts.s_list.clone();
    s_sorted.sort_by(f64::total_cmp);
    s_sorted.dedup();
    let used: Vec<f64> = s_sorted.iter().rev().take(2).copied().collect();
    let mut weights = vec![0.0; ladder.cells.len()];
    let mut warnings = Vec::new();
    for &s in &s_sorted {
        let idx: Vec<usize> = (0..ladder.cells.len()).filter(|&i| ladder.cells[i].s == s).collect();
        let mut by_delta = idx.clone();
        by_delta.sort_by(|&a, &b| ladder.cells[b].delta.total_cmp(&ladder.cells[a].delta));
        for w in by_delta.windows(2) {
            let (coarse, fine) = (&ladder.cells[w[0]], &ladder.cells[w[1]]);
            if fine.estimate.value < coarse.estimate.value {
                warnings.push(format!(
                    "non-monotone ladder at S = {s}: delta {} gives {:.5}, delta {} gives {:.5}",
                    coarse.delta,
                    coarse.estimate.value / s,
                    fine.delta,
                    fine.estimate.value / s
                ));
            }
        }
        if used.contains(&s) {
            let x: Vec<f64> = idx.iter().map(|&i| ladder.cells[i].delta.powf(alpha / 2.0)).collect();
            for (&i, w) in idx.iter().zip(intercept_weights(&x)) {
                weights[i] += w / s / used.len() as f64;
            }
        }
    }
    let k = ladder.cells.len();
    let combined: Vec<f64> = (0..ladder.n_rep).map(|r| (0..k).map(|i| weights[i] * ladder.samples[r * k + i]).sum()).collect();
    let (value, std_error) = mean_and_se(&combined);
    let d_min = opts.delta_list.iter().copied().fold(f64::INFINITY, f64::min);
    let distinct_delta = {
        let mut d = opts.delta_list.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d.len()
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let estimate = ConstantEstimate {
        value,
        std_error,
        n_rep: opts.n_rep,
        delta: d_min,
        horizon: *s_sorted.last().expect("non-empty"),
        extrapolated: distinct_delta > 1,
        warnings,
    };
    Ok((estimate, ladder))
}
