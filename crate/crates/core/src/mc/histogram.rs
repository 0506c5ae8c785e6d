use serde::Serialize;

use super::{Estimate, TrialSample};
use crate::error::{Error, Result};
use crate::optimizer::WEIGHT_ZERO_TOL;
use crate::weights::WeightMixture;

/// Weights pooled over trials and assets: an atom at zero plus a histogram
/// of the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightHistogram {
    pub bin_width: f64,
    /// Left edge of the first bin, a multiple of `bin_width`.
    pub lower: f64,
    pub counts: Vec<u64>,
    /// Count per bin over `total · bin_width`, so the bins integrate to `1 - atom_mass`.
    pub density: Vec<f64>,
    pub total: usize,
    pub atom_mass: f64,
    /// Standard error of `atom_mass` from the spread of per-trial zero shares.
    pub atom_se: f64,
    /// Mass the analytic mixture puts in each bin, when one was supplied.
    pub analytic_mass: Option<Vec<f64>>,
    /// `Σ_bins |empirical mass - analytic mass|` plus the analytic mass outside the bins.
    pub l1_distance: Option<f64>,
}

impl WeightHistogram {
    pub fn bin_center(&self, k: usize) -> f64 {
        self.lower + (k as f64 + 0.5) * self.bin_width
    }
}

/// Pool the weights of `samples`, counting `|w| <= 1e-8 · mean weight` as zero.
pub fn weight_histogram(samples: &[TrialSample], bin_width: f64, mixture: Option<&WeightMixture>) -> Result<WeightHistogram> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Domain(format!("bin width must be positive, got {bin_width}")));
    }
    if samples.is_empty() || samples.iter().any(|s| s.weights.is_empty()) {
        return Err(Error::Domain("histogram needs at least one trial with weights".into()));
    }

    let mut nonzero = Vec::new();
    let mut zero_shares = Vec::with_capacity(samples.len());
    let mut total = 0usize;
    for s in samples {
        let tol = WEIGHT_ZERO_TOL * s.weights.iter().sum::<f64>().abs() / s.weights.len() as f64;
        let before = nonzero.len();
        nonzero.extend(s.weights.iter().copied().filter(|w| w.abs() > tol));
        let zeros = s.weights.len() - (nonzero.len() - before);
        zero_shares.push(zeros as f64 / s.weights.len() as f64);
        total += s.weights.len();
    }
    let zeros = total - nonzero.len();
    let atom_mass = zeros as f64 / total as f64;
    let atom_se = Estimate::of(&zero_shares).se;

    let (lower, bins) = if nonzero.is_empty() {
        (0.0, 0)
    } else {
        let lo = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nonzero.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / bin_width).floor();
        let last = (hi / bin_width).floor();
        (first * bin_width, (last - first) as usize + 1)
    };
    let mut counts = vec![0u64; bins];
    for &w in &nonzero {
        let k = (((w - lower) / bin_width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (total as f64 * bin_width)).collect();

    let (analytic_mass, l1_distance) = match mixture {
        Some(mix) => {
            let edge = |k: usize| lower + k as f64 * bin_width;
            let masses: Vec<f64> = (0..bins).map(|k| mix.continuous_cdf(edge(k + 1)) - mix.continuous_cdf(edge(k))).collect();
            let continuous = 1.0 - mix.atom();
            let inside: f64 = masses.iter().sum();
            let l1 = counts
                .iter()
                .zip(&masses)
                .map(|(&c, m)| (c as f64 / total as f64 - m).abs())
                .sum::<f64>()
                + (continuous - inside).max(0.0);
            (Some(masses), Some(l1))
        }
        None => (None, None),
    };

    Ok(WeightHistogram { bin_width, lower, counts, density, total, atom_mass, atom_se, analytic_mass, l1_distance })
}
