//! Monte Carlo harness: synthetic returns, exact per-sample optimization and
//! trial statistics.
//!
//! Every trial is a pure function of `(seed, N, T, trial number)`. The
//! returns of asset `i` come from a ChaCha8 stream keyed by the master seed,
//! with the trial index selecting the stream and the asset index selecting a
//! disjoint block of that stream. Sweeps run the trials on a rayon pool and
//! reduce them in trial order, so the worker count never changes a result.

mod histogram;
mod susceptibility;

pub use histogram::{weight_histogram, WeightHistogram};
pub use susceptibility::{susceptibility_proxy, susceptibility_sweep};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{min_variance_equality, min_variance_noshort, Constraint, CovMatrix, WEIGHT_ZERO_TOL};
use crate::replica::AssetUniverse;

/// Each asset's block of the trial stream holds `2^ASSET_BLOCK_BITS` words.
const ASSET_BLOCK_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub universe: AssetUniverse,
    /// Number of observations.
    pub t: usize,
    pub constraint: Constraint,
    pub seed: u64,
    pub trial_index: u64,
}

impl TrialConfig {
    pub fn new(universe: AssetUniverse, t: usize, constraint: Constraint, seed: u64, trial_index: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::Domain("a trial needs at least one observation".into()));
        }
        Ok(Self { universe, t, constraint, seed, trial_index })
    }

    pub fn n(&self) -> usize {
        self.universe.len()
    }

    /// `r = N/T`.
    pub fn r(&self) -> f64 {
        self.n() as f64 / self.t as f64
    }
}

/// `N × T` returns with entry `(i, t)` drawn from `N(0, σ_i²/N)`.
pub fn generate_returns(cfg: &TrialConfig) -> DMatrix<f64> {
    let n = cfg.n();
    let scale = 1.0 / (n as f64).sqrt();
    let mut x = DMatrix::zeros(n, cfg.t);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.trial_index);
    for (i, &sigma) in cfg.universe.sigmas().iter().enumerate() {
        rng.set_word_pos((i as u128) << ASSET_BLOCK_BITS);
        for t in 0..cfg.t {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            x[(i, t)] = sigma * scale * z;
        }
    }
    x
}

/// Observables of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMetrics {
    /// `ŵ'Ĉŵ / r` with `Σ ŵ = N`.
    pub lambda_hat: f64,
    /// True risk of `ŵ` over true risk of the true optimum.
    pub q0_tilde_hat: f64,
    /// Share of weights with `|ŵ_i| <= 1e-8`.
    pub zero_fraction: f64,
    /// In-sample variance `ŵ'Ĉŵ`.
    pub objective: f64,
    pub degenerate: bool,
}

/// Metrics and optimal weights of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSample {
    pub metrics: SampleMetrics,
    pub weights: Vec<f64>,
}

pub fn run_trial(cfg: &TrialConfig) -> Result<SampleMetrics> {
    solve_trial(cfg).map(|s| s.metrics)
}

/// Like [`run_trial`], keeping the optimal weights.
pub fn solve_trial(cfg: &TrialConfig) -> Result<TrialSample> {
    let n = cfg.n();
    let budget = n as f64;
    let wrap = |e: Error| Error::Trial { r: cfg.r(), t: cfg.t, trial: cfg.trial_index, source: Box::new(e) };
    let cov = CovMatrix::from_returns(&generate_returns(cfg)).map_err(wrap)?;
    let result = match cfg.constraint {
        Constraint::Equality => min_variance_equality(&cov, budget),
        Constraint::NoShort => min_variance_noshort(&cov, budget),
    }
    .map_err(wrap)?;

    let c2 = cfg.universe.c2();
    let risk: f64 = cfg.universe.sigmas().iter().zip(&result.weights).map(|(s, w)| s * s * w * w).sum();
    let zero = WEIGHT_ZERO_TOL * budget / n as f64;
    let zeros = result.weights.iter().filter(|w| w.abs() <= zero).count();
    let metrics = SampleMetrics {
        lambda_hat: result.objective / cfg.r(),
        // the true optimum has Σ σ_i² w*_i² = N / c2
        q0_tilde_hat: risk * c2 / n as f64,
        zero_fraction: zeros as f64 / n as f64,
        objective: result.objective,
        degenerate: result.degenerate,
    };
    Ok(TrialSample { metrics, weights: result.weights })
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Two-pass mean and `s/√n` in slice order.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }
}

/// Trial statistics at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Requested aspect ratio.
    pub r_nominal: f64,
    /// Realized `N/T` with `T = round(N / r_nominal)`.
    pub r: f64,
    pub t: usize,
    pub trials: usize,
    pub lambda_hat: Estimate,
    pub q0_tilde_hat: Estimate,
    pub zero_fraction: Estimate,
    pub objective: Estimate,
    /// Share of trials whose optimum has zero in-sample variance.
    pub zero_variance_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub n: usize,
    pub seed: u64,
    pub constraint: Constraint,
    pub points: Vec<SweepPoint>,
}

/// Settings shared by every grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub universe: AssetUniverse,
    pub constraint: Constraint,
    pub seed: u64,
    /// Worker cap; `None` uses the rayon default.
    pub threads: Option<usize>,
}

/// A sweep with every per-trial sample kept, grouped by grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub summary: SweepSummary,
    pub samples: Vec<Vec<TrialSample>>,
}

/// Sample length used for a nominal ratio.
pub fn sample_length(n: usize, r: f64) -> Result<usize> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("aspect ratio must be positive and finite, got {r}")));
    }
    Ok(((n as f64 / r).round() as usize).max(1))
}

/// Trial index of trial `k` at sample length `t`; depends only on `(t, k)`.
pub fn trial_index(t: usize, k: usize) -> u64 {
    ((t as u64) << 32) | k as u64
}

pub fn sweep(grid: &[f64], trials: usize, template: &SweepTemplate) -> Result<SweepSummary> {
    sweep_with_samples(grid, trials, template).map(|run| run.summary)
}

/// Run `trials` trials at every grid point and keep the samples.
pub fn sweep_with_samples(grid: &[f64], trials: usize, template: &SweepTemplate) -> Result<SweepRun> {
    if grid.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    if trials < 2 {
        return Err(Error::Domain(format!("a sweep needs at least two trials per point, got {trials}")));
    }
    let n = template.universe.len();
    let lengths = grid.iter().map(|&r| sample_length(n, r)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|p| (0..trials).map(move |k| (p, k))).collect();

    let run = || -> Vec<Result<TrialSample>> {
        jobs.par_iter()
            .map(|&(p, k)| {
                let cfg = TrialConfig::new(
                    template.universe.clone(),
                    lengths[p],
                    template.constraint,
                    template.seed,
                    trial_index(lengths[p], k),
                )?;
                solve_trial(&cfg)
            })
            .collect()
    };
    let results = match template.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut samples: Vec<Vec<TrialSample>> = vec![Vec::with_capacity(trials); grid.len()];
    for ((p, _), res) in jobs.iter().zip(results) {
        samples[*p].push(res?);
    }
    let points = grid
        .iter()
        .zip(&lengths)
        .zip(&samples)
        .map(|((&r_nominal, &t), s)| summarize(r_nominal, n, t, s))
        .collect();
    let summary = SweepSummary { n, seed: template.seed, constraint: template.constraint, points };
    Ok(SweepRun { summary, samples })
}

fn summarize(r_nominal: f64, n: usize, t: usize, samples: &[TrialSample]) -> SweepPoint {
    let pick = |f: fn(&SampleMetrics) -> f64| -> Vec<f64> { samples.iter().map(|s| f(&s.metrics)).collect() };
    let degenerate = samples.iter().filter(|s| s.metrics.degenerate).count();
    SweepPoint {
        r_nominal,
        r: n as f64 / t as f64,
        t,
        trials: samples.len(),
        lambda_hat: Estimate::of(&pick(|m| m.lambda_hat)),
        q0_tilde_hat: Estimate::of(&pick(|m| m.q0_tilde_hat)),
        zero_fraction: Estimate::of(&pick(|m| m.zero_fraction)),
        objective: Estimate::of(&pick(|m| m.objective)),
        zero_variance_probability: degenerate as f64 / samples.len() as f64,
    }
}

/// Share of no-short trials with zero in-sample variance, per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub r_nominal: f64,
    pub r: f64,
    pub t: usize,
    pub trials: usize,
    pub probability: f64,
    /// Binomial standard error `√(p(1-p)/trials)`.
    pub se: f64,
}

pub fn zero_variance_probability(
    grid: &[f64],
    universe: &AssetUniverse,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<PhasePoint>> {
    let template = SweepTemplate { universe: universe.clone(), constraint: Constraint::NoShort, seed, threads };
    let summary = sweep(grid, trials, &template)?;
    Ok(summary
        .points
        .iter()
        .map(|p| {
            let q = p.zero_variance_probability;
            PhasePoint {
                r_nominal: p.r_nominal,
                r: p.r,
                t: p.t,
                trials: p.trials,
                probability: q,
                se: (q * (1.0 - q) / p.trials as f64).sqrt(),
            }
        })
        .collect())
}
