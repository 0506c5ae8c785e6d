use super::{check_ratio, AssetUniverse, RegularizerParams, ReplicaSolution};
use crate::error::{Error, Result};
use crate::specfun::{cdf_and_integrals, normal_cdf, INV_SQRT_2PI};

/// The no-short saddle point exists for `r < 2`, where `W(0) = 1/4` meets `1/(2r)`.
pub(crate) const CRITICAL_RATIO: f64 = 2.0;

const MAX_ITER: usize = 400;

/// Chemical potential of the no-short problem: the unique `λ > 0` with
/// `(1/N) Σ_i W(√λ/σ_i) = 1/(2r)`.
///
/// Solved in `x = √λ` by Newton's method safeguarded with bisection. The
/// bracket `[0, x_hi]` is exact: `W` is convex with tangent `1/4 + x/√(2π)`
/// at zero, so `x_hi = √(2π)(1/(2r) - 1/4)/c1` already overshoots the root.
pub fn noshort_lambda(universe: &AssetUniverse, r: f64) -> Result<f64> {
    check_ratio(r)?;
    if r >= CRITICAL_RATIO {
        return Err(Error::CriticalPhase { r, critical: CRITICAL_RATIO });
    }
    let target = 0.5 / r;
    let n = universe.len() as f64;
    let eval = |x: f64| {
        let mut g = 0.0;
        let mut dg = 0.0;
        for &s in universe.sigmas() {
            let (_, psi, w) = cdf_and_integrals(x / s);
            g += w;
            dg += psi / s;
        }
        (g / n - target, dg / n)
    };

    let mut lo = 0.0;
    let mut hi = (target - 0.25) / (INV_SQRT_2PI * universe.c1());
    while eval(hi).0 < 0.0 {
        hi *= 2.0;
    }
    let tol = 1e-14 * target.max(1.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (g, dg) = eval(x);
        if g.abs() <= tol {
            break;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == x || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        x = next;
    }
    Ok(x * x)
}

/// Full no-short saddle point.
///
/// With `Φ̄ = (1/N) Σ Φ(√λ/σ_i)`: `Δ = rΦ̄/(1 - rΦ̄)`, `q0 = λ r (1+Δ)²`,
/// weight centers `q0/((1+Δ)σ_i²)`, widths `√(q0 r)/σ_i` and condensate
/// `n0 = (1/N) Σ Φ(-√λ/σ_i)`.
pub fn noshort_solution(universe: &AssetUniverse, r: f64) -> Result<ReplicaSolution> {
    let lambda = noshort_lambda(universe, r)?;
    let x = lambda.sqrt();
    let phi_bar = universe.sigmas().iter().map(|s| normal_cdf(x / s)).sum::<f64>() / universe.len() as f64;
    let delta = r * phi_bar / (1.0 - r * phi_bar);
    let q0 = lambda * r * (1.0 + delta) * (1.0 + delta);
    Ok(ReplicaSolution::assemble(universe, r, &RegularizerParams::no_short(), lambda, q0, delta))
}
