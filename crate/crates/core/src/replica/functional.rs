use super::{check_ratio, AssetUniverse, OrderParams, Penalty, RegularizerParams};
use crate::error::{Error, Result};
use crate::specfun::cdf_double_integral;

/// Replica free energy per asset at an arbitrary order-parameter tuple:
///
/// ```text
/// f = λ - Δq̂0 - Δ̂q0 + q0/(2r(1+Δ))
///     + (q̂0/Δ̂)(1/N) Σ [ W((λ-η1)/(σ_i√(-2q̂0))) + W(-(λ+η2)/(σ_i√(-2q̂0))) ]
/// ```
///
/// Requires `q̂0 < 0`, `Δ̂ > 0` and `Δ > -1`.
pub fn free_energy(op: &OrderParams, universe: &AssetUniverse, r: f64, reg: &RegularizerParams) -> Result<f64> {
    check_ratio(r)?;
    let OrderParams { lambda, q0, delta, q0_hat, delta_hat } = *op;
    if !(q0_hat < 0.0 && delta_hat > 0.0 && delta > -1.0) || op.to_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "free energy needs q0_hat < 0, delta_hat > 0, delta > -1; got {op:?}"
        )));
    }
    let scale = (-2.0 * q0_hat).sqrt();
    let mut sum = 0.0;
    for &s in universe.sigmas() {
        sum += cdf_double_integral((lambda - reg.eta1) / (s * scale));
        if let Penalty::Finite(eta2) = reg.eta2 {
            sum += cdf_double_integral(-(lambda + eta2) / (s * scale));
        }
    }
    let mean = sum / universe.len() as f64;
    Ok(lambda - delta * q0_hat - delta_hat * q0 + q0 / (2.0 * r * (1.0 + delta)) + q0_hat / delta_hat * mean)
}

/// Gradient of [`free_energy`] with respect to `(λ, q0, Δ, q̂0, Δ̂)`.
///
/// Central differences with a step relative to each coordinate, improved by
/// one Richardson extrapolation, so the truncation error is `O(h⁴)`.
pub fn stationarity_residual(
    op: &OrderParams,
    universe: &AssetUniverse,
    r: f64,
    reg: &RegularizerParams,
) -> Result<[f64; 5]> {
    free_energy(op, universe, r, reg)?;
    let x = op.to_array();
    let mut grad = [0.0; 5];
    for j in 0..5 {
        let h = 1e-3 * x[j].abs().max(1e-8);
        let central = |h: f64| -> Result<f64> {
            let mut up = x;
            let mut dn = x;
            up[j] += h;
            dn[j] -= h;
            let fu = free_energy(&OrderParams::from_array(up), universe, r, reg)?;
            let fd = free_energy(&OrderParams::from_array(dn), universe, r, reg)?;
            Ok((fu - fd) / (2.0 * h))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        grad[j] = (4.0 * fine - coarse) / 3.0;
    }
    Ok(grad)
}
