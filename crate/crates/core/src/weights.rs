//! Ensemble distribution of the optimal weights.
//!
//! Each asset contributes, with weight `1/N`, a Gaussian of width `σ_w` for
//! its positive weights (center `w1`), another for its negative weights
//! (center `w2 >= w1`) and an atom at zero holding `Φ(w2/σ_w) - Φ(w1/σ_w)`.
//! Without a penalty `w1 = w2` and the atom vanishes; with short positions
//! banned `w2 = +∞` and the negative branch is empty.

use rand::Rng;

use crate::error::{Error, Result};
use crate::replica::{Penalty, RegularizerParams, ReplicaSolution};
use crate::specfun::{cdf_integral, normal_cdf, normal_pdf, normal_quantile};

/// Below this branch mass a truncated Gaussian is drawn by inverse CDF
/// instead of rejection.
const REJECTION_MIN_MASS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub center_pos: f64,
    /// `+∞` when shorts are banned.
    pub center_neg: f64,
    pub std: f64,
}

impl MixtureComponent {
    /// Mass of the positive branch, `Φ(w1/σ_w)`.
    pub fn positive_mass(&self) -> f64 {
        normal_cdf(self.center_pos / self.std)
    }

    /// Mass of the negative branch, `Φ(-w2/σ_w)`.
    pub fn negative_mass(&self) -> f64 {
        if self.center_neg.is_infinite() {
            0.0
        } else {
            normal_cdf(-self.center_neg / self.std)
        }
    }

    /// Mass of the atom at zero.
    pub fn atom(&self) -> f64 {
        let a = self.center_pos / self.std;
        if self.center_neg.is_infinite() {
            return normal_cdf(-a);
        }
        let b = self.center_neg / self.std;
        let m = if a > 0.0 { normal_cdf(-a) - normal_cdf(-b) } else { normal_cdf(b) - normal_cdf(a) };
        m.max(0.0)
    }
}

/// Atom at zero plus a continuous density, one component per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMixture {
    pub n0: f64,
    pub components: Vec<MixtureComponent>,
}

pub fn build_mixture(sol: &ReplicaSolution, reg: &RegularizerParams) -> WeightMixture {
    let components: Vec<MixtureComponent> = sol
        .per_asset
        .iter()
        .map(|a| MixtureComponent {
            center_pos: a.center_pos,
            center_neg: if reg.eta2 == Penalty::Infinite { f64::INFINITY } else { a.center_neg },
            std: a.std,
        })
        .collect();
    WeightMixture::new(components)
}

impl WeightMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Self {
        let n0 = components.iter().map(MixtureComponent::atom).sum::<f64>() / components.len() as f64;
        Self { n0, components }
    }

    pub fn atom(&self) -> f64 {
        self.n0
    }

    /// Continuous part of the density at `w`; the atom is reported by [`atom`](Self::atom).
    pub fn density(&self, w: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                let center = if w >= 0.0 { c.center_pos } else { c.center_neg };
                if center.is_infinite() {
                    0.0
                } else {
                    normal_pdf((w - center) / c.std) / c.std
                }
            })
            .sum();
        sum / self.components.len() as f64
    }

    /// Mass of the continuous part on `(-∞, w]`.
    pub fn continuous_cdf(&self, w: f64) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                if w < 0.0 {
                    if c.center_neg.is_infinite() {
                        0.0
                    } else {
                        normal_cdf((w - c.center_neg) / c.std)
                    }
                } else {
                    c.negative_mass() + normal_cdf((w - c.center_pos) / c.std) - normal_cdf(-c.center_pos / c.std)
                }
            })
            .sum();
        sum / self.components.len() as f64
    }

    /// Mean weight, `(1/N) Σ σ_w [Ψ(w1/σ_w) - Ψ(-w2/σ_w)]`.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| {
                let neg = if c.center_neg.is_infinite() { 0.0 } else { cdf_integral(-c.center_neg / c.std) };
                c.std * (cdf_integral(c.center_pos / c.std) - neg)
            })
            .sum();
        sum / self.components.len() as f64
    }
}

/// Probability that asset `index` is pinned at zero, `Φ(-w0/σ_w)` under no-short.
pub fn elimination_probability(sol: &ReplicaSolution, index: usize) -> Result<f64> {
    sol.per_asset.get(index).map(|a| a.elim_prob).ok_or_else(|| {
        Error::Domain(format!("asset index {index} out of range for a universe of {}", sol.per_asset.len()))
    })
}

/// Independent draws from the mixture.
///
/// An asset is picked uniformly, then the atom or one of the two branches by
/// mass. Branches are sampled by rejection against the untruncated Gaussian,
/// or by inverse CDF when the branch mass is small.
pub fn sample_weights<R: Rng + ?Sized>(mix: &WeightMixture, count: usize, rng: &mut R) -> Vec<f64> {
    let n = mix.components.len();
    (0..count)
        .map(|_| {
            let c = &mix.components[rng.random_range(0..n)];
            let u: f64 = rng.random();
            let neg = c.negative_mass();
            let atom = c.atom();
            if u < neg {
                -truncated_above(-c.center_neg, c.std, rng)
            } else if u < neg + atom {
                0.0
            } else {
                truncated_above(c.center_pos, c.std, rng)
            }
        })
        .collect()
}

/// Draw from `N(center, std²)` conditioned on being positive.
fn truncated_above<R: Rng + ?Sized>(center: f64, std: f64, rng: &mut R) -> f64 {
    let a = -center / std;
    let mass = normal_cdf(-a);
    if mass >= REJECTION_MIN_MASS {
        loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            if z > a {
                return center + std * z;
            }
        }
    }
    // P(Z > z) = v P(Z > a) with v uniform on (0, 1]
    let v = 1.0 - rng.random::<f64>();
    let z = -normal_quantile(v * mass);
    (center + std * z.max(a)).max(0.0)
}
