//! Crude Monte Carlo for `P(sup_{t in grid} (Y(t) + h(t)) > u)`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::asympt::{asymptotic, Model, Regime};
use crate::constants::ConstantsCache;
use crate::error::{Error, Result};
use crate::gauss::{stream_rng, unit_sampler, CorrelationSpec, GridSpec};
use crate::homog::eval_fast;
use crate::special::Z_975;

const CHUNK: usize = 256;
/// Smallest number of samples accepted by [`estimate_sup_prob`].
pub const MIN_SAMPLES: usize = 1000;
/// Expected hit count below which a run is reported as under-powered.
pub const MIN_HITS: f64 = 10.0;

/// Grid step of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GridStep {
    /// `0.1 (u / g_hat)^{-2/alpha*}`, capped at `T`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for GridStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GridStep::Auto => s.serialize_str("auto"),
            GridStep::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for GridStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(t) if t == "auto" => Ok(GridStep::Auto),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("grid_step must be \"auto\" or a positive number, got {t:?}"))),
            Repr::Number(v) if v > 0.0 && v.is_finite() => Ok(GridStep::Fixed(v)),
            Repr::Number(v) => Err(serde::de::Error::custom(format!("grid_step must be positive, got {v}"))),
        }
    }
}

/// A proportion with its 95% Wilson score interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub p_hat: f64,
    pub n: usize,
    pub hits: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub grid_step: f64,
    pub wall_time_s: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// 95% Wilson score interval for `hits` successes out of `n`.
pub fn wilson(hits: usize, n: usize) -> (f64, f64) {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = Z_975 * Z_975;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z_975 / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

impl EstimateWithCI {
    fn from_hits(hits: usize, n: usize, grid_step: f64, seed: u64, wall_time_s: f64) -> Self {
        let (ci_low, ci_high) = wilson(hits, n);
        let mut warnings = Vec::new();
        if (hits as f64) < MIN_HITS {
            let rate = if hits > 0 { hits as f64 / n as f64 } else { ci_high };
            warnings.push(format!(
                "under-powered: {hits} hits in {n} samples; roughly {} samples are needed for {MIN_HITS} hits",
                (MIN_HITS / rate).ceil()
            ));
        }
        Self { p_hat: hits as f64 / n as f64, n, hits, ci_low, ci_high, grid_step, wall_time_s, seed, warnings }
    }
}

/// `0.1 (u / g_hat)^{-2/alpha*}`, capped at the horizon.
pub fn auto_grid_step(model: &Model, u: f64) -> Result<f64> {
    let alpha_star = model.alpha_star()?;
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::Domain(format!("the automatic grid step needs u > 0, got {u}")));
    }
    Ok((0.1 * (u / model.analysis.g_hat).powf(-2.0 / alpha_star)).min(model.spec.horizon))
}

/// Uniform grid on `[0, T]` whose step is at most `step` and whose number of
/// intervals is a multiple of `multiple`.
fn grid_for(model: &Model, step: f64, multiple: usize) -> Result<GridSpec> {
    let t_max = model.spec.horizon;
    if let CorrelationSpec::CustomPsdMatrix { matrix } = &model.spec.corr {
        let n = matrix.len();
        return GridSpec::new(0.0, t_max, n);
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Precondition(format!("grid step must be positive, got {step}")));
    }
    let intervals = ((t_max / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let intervals = intervals.div_ceil(multiple) * multiple;
    GridSpec::new(0.0, t_max, intervals + 1)
}

fn resolve_step(model: &Model, u: f64, step: GridStep) -> Result<f64> {
    match step {
        GridStep::Auto => auto_grid_step(model, u),
        GridStep::Fixed(s) => Ok(s),
    }
}

/// The grid `estimate_sup_prob` simulates on at threshold `u`.
pub fn simulation_grid(model: &Model, u: f64, grid_step: GridStep) -> Result<GridSpec> {
    grid_for(model, resolve_step(model, u, grid_step)?, 1)
}

/// Per-replicate suprema of `g(X(t)) + h(t)` over the grid points `k * stride`,
/// one vector per stride.
fn sup_values(model: &Model, grid: &GridSpec, n: usize, seed: u64, strides: &[usize]) -> Result<Vec<Vec<f64>>> {
    let sampler = unit_sampler(&model.spec.corr, grid)?;
    let times = grid.times();
    let sigma: Vec<f64> = times.iter().map(|&t| model.spec.var.sigma(t)).collect();
    let trend: Vec<f64> = times.iter().map(|&t| model.spec.trend.h.eval(t)).collect();
    let d = model.spec.homog.d;
    let pts = grid.n_points;
    let homog = &model.spec.homog;
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let reps = CHUNK.min(n - c * CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            let mut paths = vec![vec![0.0; pts]; reps * d];
            sampler.fill(&mut rng, &mut Vec::new(), &mut paths);
            let mut x = vec![0.0; d];
            let mut out = Vec::with_capacity(reps * strides.len());
            for r in 0..reps {
                let comps = &paths[r * d..(r + 1) * d];
                let y: Vec<f64> = (0..pts)
                    .map(|j| {
                        for (xi, comp) in x.iter_mut().zip(comps) {
                            *xi = sigma[j] * comp[j];
                        }
                        eval_fast(homog, &x) + trend[j]
                    })
                    .collect();
                for &s in strides {
                    out.push(y.iter().step_by(s).copied().fold(f64::NEG_INFINITY, f64::max));
                }
            }
            out
        })
        .collect();
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    let k = strides.len();
    Ok((0..k).map(|i| flat.iter().skip(i).step_by(k).copied().collect()).collect())
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        Err(Error::Precondition(format!("need at least {MIN_SAMPLES} samples, got {n}")))
    } else {
        Ok(())
    }
}

fn count(sups: &[f64], u: f64) -> usize {
    sups.iter().filter(|&&s| s > u).count()
}

/// Crude Monte Carlo estimate of the exceedance probability on a uniform grid
/// of `[0, T]`. Replicates are simulated in blocks of 256, block `k` drawing
/// from generator stream `k` of `seed`, so the result does not depend on the
/// number of threads.
pub fn estimate_sup_prob(model: &Model, u: f64, grid_step: GridStep, n_samples: usize, seed: u64) -> Result<EstimateWithCI> {
    check_samples(n_samples)?;
    let start = Instant::now();
    let grid = grid_for(model, resolve_step(model, u, grid_step)?, 1)?;
    let sups = sup_values(model, &grid, n_samples, seed, &[1])?;
    Ok(EstimateWithCI::from_hits(count(&sups[0], u), n_samples, grid.step(), seed, start.elapsed().as_secs_f64()))
}

/// Estimates for several thresholds from the same paths.
pub fn estimate_sup_probs(model: &Model, u_list: &[f64], grid_step: f64, n_samples: usize, seed: u64) -> Result<Vec<EstimateWithCI>> {
    check_samples(n_samples)?;
    let start = Instant::now();
    let grid = grid_for(model, grid_step, 1)?;
    let sups = sup_values(model, &grid, n_samples, seed, &[1])?;
    let secs = start.elapsed().as_secs_f64();
    Ok(u_list.iter().map(|&u| EstimateWithCI::from_hits(count(&sups[0], u), n_samples, grid.step(), seed, secs)).collect())
}

/// Estimates on nested grids: the finest has step at most `fine_step`, and
/// the estimate for stride `s` uses every `s`-th point of the same paths.
pub fn estimate_on_nested_grids(
    model: &Model,
    u: f64,
    fine_step: f64,
    strides: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<EstimateWithCI>> {
    check_samples(n_samples)?;
    if strides.is_empty() || strides.contains(&0) {
        return Err(Error::Precondition("strides must be positive".into()));
    }
    let start = Instant::now();
    let lcm = strides.iter().fold(1usize, |acc, &s| acc / gcd(acc, s) * s);
    let grid = grid_for(model, fine_step, lcm)?;
    let sups = sup_values(model, &grid, n_samples, seed, strides)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(strides
        .iter()
        .zip(&sups)
        .map(|(&s, v)| EstimateWithCI::from_hits(count(v, u), n_samples, grid.step() * s as f64, seed, secs))
        .collect())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Monte Carlo estimate next to the asymptotic value at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub u: f64,
    pub mc: EstimateWithCI,
    pub asympt_value: f64,
    /// `p_hat / asympt_value`.
    pub ratio: f64,
    pub regime: Regime,
}

/// One row per threshold. Thresholds sharing a grid share their paths.
pub fn compare(
    model: &Model,
    cache: &ConstantsCache,
    u_list: &[f64],
    grid_step: GridStep,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    if n_samples == 0 || u_list.is_empty() {
        return Err(Error::Precondition("comparison needs at least one threshold and a positive sample count".into()));
    }
    check_samples(n_samples)?;
    let mut by_grid: BTreeMap<usize, (GridSpec, Vec<f64>, f64)> = BTreeMap::new();
    let mut rows = Vec::with_capacity(u_list.len());
    for &u in u_list {
        let asym = asymptotic(model, cache, u)?;
        let grid = grid_for(model, resolve_step(model, u, grid_step)?, 1)?;
        if let std::collections::btree_map::Entry::Vacant(e) = by_grid.entry(grid.n_points) {
            let start = Instant::now();
            let sups = sup_values(model, &grid, n_samples, seed, &[1])?.pop().expect("one stride");
            e.insert((grid, sups, start.elapsed().as_secs_f64()));
        }
        let (grid, sups, secs) = &by_grid[&grid.n_points];
        let mut mc = EstimateWithCI::from_hits(count(sups, u), n_samples, grid.step(), seed, *secs);
        let expected = asym.value * n_samples as f64;
        if expected < MIN_HITS {
            mc.warnings.push(format!(
                "under-powered: about {expected:.2} hits expected at u = {u}; use n >= {} or a smaller u",
                (MIN_HITS / asym.value).ceil()
            ));
        }
        let ratio = mc.p_hat / asym.value;
        rows.push(ComparisonRow { u, mc, asympt_value: asym.value, ratio, regime: asym.regime });
    }
    Ok(rows)
}
