use super::{check_ratio, AssetUniverse, RegularizerParams, ReplicaSolution};
use crate::error::{Error, Result};

/// Closed-form saddle point without the no-short constraint.
///
/// `λ = (1-r)/(r c2)`, `Δ = r/(1-r)`, `q0 = 1/((1-r) c2)`. Refuses `r >= 1`,
/// where the sample covariance loses rank and the saddle point ceases to exist.
pub fn unconstrained_solution(universe: &AssetUniverse, r: f64) -> Result<ReplicaSolution> {
    check_ratio(r)?;
    if r >= 1.0 {
        return Err(Error::PhaseBoundary { r });
    }
    let c2 = universe.c2();
    let lambda = (1.0 - r) / (r * c2);
    let delta = r / (1.0 - r);
    let q0 = 1.0 / ((1.0 - r) * c2);
    Ok(ReplicaSolution::assemble(universe, r, &RegularizerParams::unconstrained(), lambda, q0, delta))
}
