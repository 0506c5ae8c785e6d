//! Experimental sample estimate of the susceptibility Δ.
//!
//! Add a small field `ε h` to the cost, `½ w'Ĉw − ε h'w`. While the set of
//! nonzero weights `F` stays fixed, the weights move by `ε P h` with
//!
//! `P = Ĉ_F⁻¹ − Ĉ_F⁻¹ 1 1' Ĉ_F⁻¹ / (1' Ĉ_F⁻¹ 1)`
//!
//! (zero outside `F`). The estimate is `Δ̂ = (r/N²) Σ_{i∈F} σ_i² P_ii`, the
//! ε → 0 response averaged over the assets. For the equality problem it tends
//! to `r/(1−r)`; under no-short the free set has `N Φ̄` assets and it tends to
//! `rΦ̄/(1−rΦ̄)`. Not part of the acceptance checks.

use nalgebra::{DMatrix, DVector};

use super::{generate_returns, sample_length, trial_index, Estimate, SweepTemplate, TrialConfig};
use crate::error::{Error, Result};
use crate::optimizer::{min_variance_equality, min_variance_noshort, Constraint, CovMatrix, WEIGHT_ZERO_TOL};
use rayon::prelude::*;

/// `Δ̂` for one trial; infinite when the free block of `Ĉ` is singular.
pub fn susceptibility_proxy(cfg: &TrialConfig) -> Result<f64> {
    let n = cfg.n();
    let budget = n as f64;
    let wrap = |e: Error| Error::Trial { r: cfg.r(), t: cfg.t, trial: cfg.trial_index, source: Box::new(e) };
    let cov = CovMatrix::from_returns(&generate_returns(cfg)).map_err(wrap)?;
    let result = match cfg.constraint {
        Constraint::Equality => min_variance_equality(&cov, budget),
        Constraint::NoShort => min_variance_noshort(&cov, budget),
    }
    .map_err(wrap)?;
    let free: Vec<usize> = match cfg.constraint {
        Constraint::Equality => (0..n).collect(),
        Constraint::NoShort => (0..n).filter(|&i| result.weights[i] > WEIGHT_ZERO_TOL).collect(),
    };
    let m = free.len();
    let block = DMatrix::from_fn(m, m, |a, b| cov.matrix()[(free[a], free[b])]);
    let Some(chol) = block.cholesky() else {
        return Ok(f64::INFINITY);
    };
    let inv = chol.inverse();
    let u = &inv * DVector::from_element(m, 1.0);
    let denom = u.sum();
    let sigmas = cfg.universe.sigmas();
    let trace: f64 = free
        .iter()
        .enumerate()
        .map(|(a, &i)| sigmas[i] * sigmas[i] * (inv[(a, a)] - u[a] * u[a] / denom))
        .sum();
    Ok(cfg.r() * trace / (n * n) as f64)
}

/// Mean `Δ̂` per grid point, using the same trial streams as [`super::sweep`].
pub fn susceptibility_sweep(grid: &[f64], trials: usize, template: &SweepTemplate) -> Result<Vec<Estimate>> {
    let n = template.universe.len();
    let run = || -> Result<Vec<Estimate>> {
        grid.iter()
            .map(|&r| {
                let t = sample_length(n, r)?;
                let values = (0..trials)
                    .into_par_iter()
                    .map(|k| {
                        let cfg = TrialConfig::new(template.universe.clone(), t, template.constraint, template.seed, trial_index(t, k))?;
                        susceptibility_proxy(&cfg)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Estimate::of(&values))
            })
            .collect()
    };
    match template.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}
