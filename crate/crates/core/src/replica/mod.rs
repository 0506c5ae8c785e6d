//! Saddle-point solutions of the replica free energy.
//!
//! The order parameters are the chemical potential `λ`, the out-of-sample
//! error parameter `q0`, the susceptibility `Δ` and their conjugates `q̂0`,
//! `Δ̂`. Three solvers are provided:
//!
//! * [`unconstrained_solution`]: closed form, valid for `0 < r < 1`;
//! * [`noshort_solution`]: one monotone root for `λ`, valid for `0 < r < 2`;
//! * [`general_l1_solve`]: damped Newton on the full asymmetric ℓ1 system.
//!
//! Outside the phase where a saddle point exists the solvers return
//! [`Error::PhaseBoundary`] or [`Error::CriticalPhase`] instead of
//! extrapolating. See the crate root for the normalization dictionary.

mod functional;
mod general;
mod noshort;
mod unconstrained;

pub use functional::{free_energy, stationarity_residual};
pub use general::{general_l1_solve, saddle_residuals, SaddleResiduals};
pub use noshort::{noshort_lambda, noshort_solution};
pub use unconstrained::unconstrained_solution;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::normal_cdf;

/// True per-asset standard deviations `σ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetUniverse {
    sigmas: Vec<f64>,
}

impl AssetUniverse {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::Domain("asset universe must hold at least one asset".into()));
        }
        if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Domain(format!("standard deviations must be positive and finite, got {bad}")));
        }
        Ok(Self { sigmas })
    }

    /// `n` assets sharing the same standard deviation.
    pub fn uniform(n: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; n])
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// `c1 = (1/N) Σ 1/σ_i`.
    pub fn c1(&self) -> f64 {
        self.sigmas.iter().map(|s| 1.0 / s).sum::<f64>() / self.len() as f64
    }

    /// `c2 = (1/N) Σ 1/σ_i²`.
    pub fn c2(&self) -> f64 {
        self.sigmas.iter().map(|s| 1.0 / (s * s)).sum::<f64>() / self.len() as f64
    }

    /// The same universe with every `σ_i` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.sigmas.iter().map(|s| s * factor).collect())
    }
}

/// Penalty on negative weights; `Infinite` bans short positions outright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Finite(f64),
    Infinite,
}

impl Penalty {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Penalty::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Penalty::Finite(v) => Some(v),
            Penalty::Infinite => None,
        }
    }

    /// Infinite values map onto the dedicated tag.
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Penalty::Infinite
        } else {
            Penalty::Finite(v)
        }
    }
}

/// Asymmetric ℓ1 penalties: `η1` on positive weights, `η2` on negative ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerParams {
    pub eta1: f64,
    pub eta2: Penalty,
}

impl RegularizerParams {
    pub fn new(eta1: f64, eta2: Penalty) -> Result<Self> {
        let eta2_ok = match eta2 {
            Penalty::Finite(v) => v.is_finite() && v >= 0.0,
            Penalty::Infinite => true,
        };
        if !(eta1.is_finite() && eta1 >= 0.0) || !eta2_ok {
            return Err(Error::Domain(format!("penalties must be nonnegative, got eta1 = {eta1}, eta2 = {eta2:?}")));
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn unconstrained() -> Self {
        Self { eta1: 0.0, eta2: Penalty::Finite(0.0) }
    }

    pub fn no_short() -> Self {
        Self { eta1: 0.0, eta2: Penalty::Infinite }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.eta1 == 0.0 && self.eta2 == Penalty::Finite(0.0)
    }

    pub fn is_no_short(&self) -> bool {
        self.eta1 == 0.0 && self.eta2.is_infinite()
    }
}

/// The five order parameters of the free-energy functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub lambda: f64,
    pub q0: f64,
    pub delta: f64,
    pub q0_hat: f64,
    pub delta_hat: f64,
}

impl OrderParams {
    pub fn to_array(&self) -> [f64; 5] {
        [self.lambda, self.q0, self.delta, self.q0_hat, self.delta_hat]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self { lambda: v[0], q0: v[1], delta: v[2], q0_hat: v[3], delta_hat: v[4] }
    }
}

/// Weight-distribution parameters of one asset.
///
/// `center_neg` is `+∞` when short positions are banned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetWeightParams {
    /// Center `w1` of the Gaussian feeding positive weights.
    pub center_pos: f64,
    /// Center `w2` of the Gaussian feeding negative weights.
    pub center_neg: f64,
    /// Common width `σ_w = √(q0 r)/σ_i`.
    pub std: f64,
    /// Probability that this asset's weight sits exactly at zero.
    pub elim_prob: f64,
}

/// A saddle point together with its derived observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSolution {
    pub r: f64,
    pub lambda: f64,
    pub delta: f64,
    pub q0: f64,
    pub q0_hat: f64,
    pub delta_hat: f64,
    /// Free energy per asset at the saddle point, `λ + q̂0` (equal to `λ/2`
    /// for the unconstrained and no-short problems).
    pub f: f64,
    /// Relative out-of-sample error `q0 · c2`.
    pub q0_tilde: f64,
    /// Condensate fraction: ensemble mass of weights pinned at zero.
    pub n0: f64,
    pub per_asset: Vec<AssetWeightParams>,
}

impl ReplicaSolution {
    /// Assemble a solution from `(λ, q0, Δ)` using the `q0`/`Δ` stationarity
    /// relations for the conjugates.
    ///
    /// At a saddle point the free energy collapses to `λ + q̂0`. This is `λ/2`
    /// whenever `q̂0 = -λ/2`, which holds for the unconstrained and the
    /// no-short problems; an active `η1` adds `η1/2` on top.
    pub(crate) fn assemble(
        universe: &AssetUniverse,
        r: f64,
        reg: &RegularizerParams,
        lambda: f64,
        q0: f64,
        delta: f64,
    ) -> Self {
        let one_d = 1.0 + delta;
        let delta_hat = 1.0 / (2.0 * r * one_d);
        let q0_hat = -q0 / (2.0 * r * one_d * one_d);
        let sw = (q0 * r).sqrt();
        let per_asset: Vec<AssetWeightParams> = universe
            .sigmas()
            .iter()
            .map(|&s| {
                let center_pos = (lambda - reg.eta1) * r * one_d / (s * s);
                let center_neg = match reg.eta2 {
                    Penalty::Finite(eta2) => (lambda + eta2) * r * one_d / (s * s),
                    Penalty::Infinite => f64::INFINITY,
                };
                let std = sw / s;
                let elim_prob = zero_mass(center_pos / std, center_neg / std);
                AssetWeightParams { center_pos, center_neg, std, elim_prob }
            })
            .collect();
        let n0 = per_asset.iter().map(|a| a.elim_prob).sum::<f64>() / per_asset.len() as f64;
        Self {
            r,
            lambda,
            delta,
            q0,
            q0_hat,
            delta_hat,
            f: lambda + q0_hat,
            q0_tilde: q0 * universe.c2(),
            n0,
            per_asset,
        }
    }

    pub fn order_params(&self) -> OrderParams {
        OrderParams {
            lambda: self.lambda,
            q0: self.q0,
            delta: self.delta,
            q0_hat: self.q0_hat,
            delta_hat: self.delta_hat,
        }
    }
}

/// Optimum under complete information.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueOptimum {
    /// Weights summing to `N`.
    pub weights: Vec<f64>,
    /// `Σ σ_i² w_i²`.
    pub risk: f64,
}

pub fn true_optimum(universe: &AssetUniverse) -> TrueOptimum {
    let n = universe.len() as f64;
    let c2 = universe.c2();
    let weights = universe.sigmas().iter().map(|s| 1.0 / (s * s * c2)).collect();
    TrueOptimum { weights, risk: n / c2 }
}

/// Limits of the no-short solution at its critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSummary {
    pub r_c: f64,
    pub q0_limit: f64,
    pub q0_tilde_limit: f64,
}

/// `r_c = 2` for every universe; `q0 → π/c1²` and `q̃0 → π c2/c1²`.
pub fn critical_asymptotics(universe: &AssetUniverse) -> CriticalSummary {
    let c1 = universe.c1();
    let c2 = universe.c2();
    CriticalSummary {
        r_c: noshort::CRITICAL_RATIO,
        q0_limit: PI / (c1 * c1),
        q0_tilde_limit: PI * c2 / (c1 * c1),
    }
}

/// `Φ(b) - Φ(a)` for `a <= b`, written through whichever tails keep precision.
pub(crate) fn zero_mass(a: f64, b: f64) -> f64 {
    let m = if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    };
    m.max(0.0)
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("aspect ratio r must be positive and finite, got {r}")));
    }
    Ok(())
}
