//! The asymmetric ℓ1 saddle-point system.
//!
//! After eliminating the conjugates with `Δ̂ = 1/(2r(1+Δ))` and
//! `q̂0 = -q0/(2r(1+Δ)²)`, three equations in `(λ, q0, Δ)` remain. With
//! `σ_w = √(q0 r)`, `a_i = (λ-η1) r(1+Δ)/(σ_i σ_w)` and
//! `b_i = (λ+η2) r(1+Δ)/(σ_i σ_w)`:
//!
//! ```text
//! 1/σ_w = (1/N) Σ (Ψ(a_i) - Ψ(-b_i)) / σ_i
//! Δ     = rΦ̄ / (1 - rΦ̄),        Φ̄ = (1/N) Σ Φ(a_i) + Φ(-b_i)
//! 1/(2r) = (1/N) Σ W(a_i) + W(-b_i)
//! ```
//!
//! With `η2 = ∞` every term at `-b_i` is exactly zero.

use nalgebra::{Matrix3, Vector3};

use super::{check_ratio, AssetUniverse, Penalty, RegularizerParams, ReplicaSolution};
use crate::error::{Error, Result};
use crate::specfun::cdf_and_integrals;

const NEWTON_BUDGET: usize = 200;
const SCALED_TOL: f64 = 1e-13;
/// Accept a stalled Newton run when it stalls below this level.
const STALL_TOL: f64 = 1e-11;
const FD_STEP: f64 = 1e-6;
/// Largest `r` reached directly from the closed-form guess.
const DIRECT_LIMIT: f64 = 0.5;

/// Residuals of the three reduced equations, in their literal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleResiduals {
    /// `1/√(q0 r) - (1/N) Σ (Ψ(a) - Ψ(-b))/σ`.
    pub weight_budget: f64,
    /// `Δ - rΦ̄/(1 - rΦ̄)`.
    pub susceptibility: f64,
    /// `(1/N) Σ (W(a) + W(-b)) - 1/(2r)`.
    pub condensate: f64,
}

impl SaddleResiduals {
    pub fn max_abs(&self) -> f64 {
        self.weight_budget.abs().max(self.susceptibility.abs()).max(self.condensate.abs())
    }
}

struct Sums {
    psi: f64,
    phi: f64,
    w: f64,
}

fn sums(universe: &AssetUniverse, r: f64, reg: &RegularizerParams, lambda: f64, q0: f64, delta: f64) -> Sums {
    let sw = (q0 * r).sqrt();
    let k = r * (1.0 + delta) / sw;
    let mut out = Sums { psi: 0.0, phi: 0.0, w: 0.0 };
    for &s in universe.sigmas() {
        let (phi_a, psi_a, w_a) = cdf_and_integrals((lambda - reg.eta1) * k / s);
        let (phi_b, psi_b, w_b) = match reg.eta2 {
            Penalty::Finite(eta2) => cdf_and_integrals(-(lambda + eta2) * k / s),
            Penalty::Infinite => (0.0, 0.0, 0.0),
        };
        out.psi += (psi_a - psi_b) / s;
        out.phi += phi_a + phi_b;
        out.w += w_a + w_b;
    }
    let n = universe.len() as f64;
    out.psi /= n;
    out.phi /= n;
    out.w /= n;
    out
}

/// Literal residuals of the reduced system at `(λ, q0, Δ)`.
pub fn saddle_residuals(
    universe: &AssetUniverse,
    r: f64,
    reg: &RegularizerParams,
    lambda: f64,
    q0: f64,
    delta: f64,
) -> SaddleResiduals {
    let s = sums(universe, r, reg, lambda, q0, delta);
    SaddleResiduals {
        weight_budget: 1.0 / (q0 * r).sqrt() - s.psi,
        susceptibility: delta - r * s.phi / (1.0 - r * s.phi),
        condensate: s.w - 0.5 / r,
    }
}

/// Dimensionless residuals used by the Newton iteration, in log coordinates.
fn scaled(universe: &AssetUniverse, r: f64, reg: &RegularizerParams, y: &Vector3<f64>) -> Vector3<f64> {
    let (lambda, q0, delta) = (y[0].exp(), y[1].exp(), y[2].exp());
    let s = sums(universe, r, reg, lambda, q0, delta);
    Vector3::new(
        (q0 * r).sqrt() * s.psi - 1.0,
        r * s.phi + 1.0 / (1.0 + delta) - 1.0,
        2.0 * r * s.w - 1.0,
    )
}

fn norm(v: &Vector3<f64>) -> f64 {
    v.amax()
}

enum Outcome {
    Converged(Vector3<f64>),
    Failed(Vector3<f64>),
}

/// Damped Newton with a central-difference Jacobian.
fn newton(universe: &AssetUniverse, r: f64, reg: &RegularizerParams, start: Vector3<f64>) -> Outcome {
    let mut y = start;
    let mut res = scaled(universe, r, reg, &y);
    if !res.iter().all(|v| v.is_finite()) {
        return Outcome::Failed(res);
    }
    for _ in 0..NEWTON_BUDGET {
        let current = norm(&res);
        if current < SCALED_TOL {
            return Outcome::Converged(y);
        }
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut up = y;
            let mut dn = y;
            up[j] += FD_STEP;
            dn[j] -= FD_STEP;
            let col = (scaled(universe, r, reg, &up) - scaled(universe, r, reg, &dn)) / (2.0 * FD_STEP);
            jac.set_column(j, &col);
        }
        let Some(step) = jac.lu().solve(&(-res)) else {
            return Outcome::Failed(res);
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            let trial = y + step * alpha;
            let trial_res = scaled(universe, r, reg, &trial);
            if trial_res.iter().all(|v| v.is_finite()) && norm(&trial_res) < current {
                accepted = Some((trial, trial_res));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((t, tr)) => {
                y = t;
                res = tr;
            }
            None if current < STALL_TOL => return Outcome::Converged(y),
            None => return Outcome::Failed(res),
        }
    }
    if norm(&res) < STALL_TOL {
        Outcome::Converged(y)
    } else {
        Outcome::Failed(res)
    }
}

/// Closed-form unconstrained saddle point at `r < 1`, shifted by `η1`, in log coordinates.
fn initial_guess(universe: &AssetUniverse, r: f64, reg: &RegularizerParams) -> Vector3<f64> {
    let c2 = universe.c2();
    let lambda = (1.0 - r) / (r * c2) + reg.eta1;
    let q0 = 1.0 / ((1.0 - r) * c2);
    let delta = r / (1.0 - r);
    Vector3::new(lambda.ln(), q0.ln(), delta.ln())
}

/// Solve the general asymmetric ℓ1 saddle-point system.
///
/// Targets with `r <= 0.5` start from the unconstrained closed form. Larger
/// targets are reached by continuation in `r` from 0.5, halving the step on
/// failure. A path that stalls while `Δ` blows up or `λ` collapses is reported
/// as [`Error::CriticalPhase`]; any other stall as [`Error::NoConvergence`].
pub fn general_l1_solve(universe: &AssetUniverse, r: f64, reg: &RegularizerParams) -> Result<ReplicaSolution> {
    check_ratio(r)?;
    if reg.is_unconstrained() && r >= 1.0 {
        return Err(Error::PhaseBoundary { r });
    }
    if reg.eta2.is_infinite() && r >= super::noshort::CRITICAL_RATIO {
        return Err(Error::CriticalPhase { r, critical: super::noshort::CRITICAL_RATIO });
    }

    let start_r = r.min(DIRECT_LIMIT);
    let mut y = match newton(universe, start_r, reg, initial_guess(universe, start_r, reg)) {
        Outcome::Converged(y) => y,
        Outcome::Failed(res) => return Err(no_convergence(res)),
    };
    let mut prev: Option<(f64, Vector3<f64>)> = None;
    let mut current = start_r;
    let mut step = (r - start_r) / 4.0;
    let mut iterations = 0usize;
    while current < r {
        iterations += 1;
        let next = (current + step).min(r);
        // secant predictor from the last two accepted points
        let guess = match prev {
            Some((pr, py)) => y + (y - py) * ((next - current) / (current - pr)),
            None => y,
        };
        match newton(universe, next, reg, guess) {
            Outcome::Converged(ny) => {
                prev = Some((current, y));
                y = ny;
                current = next;
                step *= 1.5;
            }
            Outcome::Failed(res) => {
                step *= 0.5;
                if step < 1e-12 * r || iterations > 10_000 {
                    let (lambda, delta) = (y[0].exp(), y[2].exp());
                    if delta > 1e6 || lambda < 1e-12 / universe.c2() {
                        return Err(Error::CriticalPhase { r, critical: current });
                    }
                    return Err(no_convergence(res));
                }
            }
        }
    }
    let (lambda, q0, delta) = (y[0].exp(), y[1].exp(), y[2].exp());
    Ok(ReplicaSolution::assemble(universe, r, reg, lambda, q0, delta))
}

fn no_convergence(res: Vector3<f64>) -> Error {
    Error::NoConvergence { iterations: NEWTON_BUDGET, residuals: [res[0], res[1], res[2]] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::{noshort_lambda, noshort_solution, unconstrained_solution};

    fn check_residuals(u: &AssetUniverse, r: f64, reg: &RegularizerParams, s: &ReplicaSolution) {
        let res = saddle_residuals(u, r, reg, s.lambda, s.q0, s.delta);
        assert!(res.max_abs() < 1e-10, "r={r}: {res:?}");
    }

    #[test]
    fn unconstrained_corner() {
        let u = AssetUniverse::uniform(6, 1.0).unwrap();
        let reg = RegularizerParams::unconstrained();
        let s = general_l1_solve(&u, 0.5, &reg).unwrap();
        assert!((s.lambda - 1.0).abs() < 1e-10);
        assert!((s.delta - 1.0).abs() < 1e-10);
        assert!((s.q0 - 2.0).abs() < 1e-10);
        check_residuals(&u, 0.5, &reg, &s);
    }

    #[test]
    fn unconstrained_corner_mixed_universe() {
        let u = AssetUniverse::new(vec![0.5, 1.0, 2.0, 4.0]).unwrap();
        let reg = RegularizerParams::unconstrained();
        for r in [0.05, 0.3, 0.7, 0.95] {
            let a = general_l1_solve(&u, r, &reg).unwrap();
            let b = unconstrained_solution(&u, r).unwrap();
            assert!((a.lambda - b.lambda).abs() < 1e-8 * b.lambda.max(1.0), "r={r}");
            assert!((a.delta - b.delta).abs() < 1e-8 * b.delta.max(1.0), "r={r}");
            assert!((a.q0 - b.q0).abs() < 1e-8 * b.q0.max(1.0), "r={r}");
            check_residuals(&u, r, &reg, &a);
        }
    }

    #[test]
    fn noshort_corner() {
        let u = AssetUniverse::uniform(6, 1.0).unwrap();
        let reg = RegularizerParams::no_short();
        let s = general_l1_solve(&u, 1.0, &reg).unwrap();
        let lambda = noshort_lambda(&u, 1.0).unwrap();
        assert!((s.lambda - lambda).abs() < 1e-8);
        check_residuals(&u, 1.0, &reg, &s);

        let u = AssetUniverse::new(vec![1.0, 2.0, 4.0]).unwrap();
        for r in [0.2, 0.9, 1.5, 1.9] {
            let a = general_l1_solve(&u, r, &reg).unwrap();
            let b = noshort_solution(&u, r).unwrap();
            assert!((a.lambda - b.lambda).abs() < 1e-8, "r={r}");
            assert!((a.delta - b.delta).abs() < 1e-8 * b.delta.max(1.0), "r={r}");
            assert!((a.q0 - b.q0).abs() < 1e-8, "r={r}");
            assert!((a.n0 - b.n0).abs() < 1e-8, "r={r}");
            check_residuals(&u, r, &reg, &a);
        }
    }

    #[test]
    fn large_finite_eta2_is_continuous() {
        let u = AssetUniverse::uniform(4, 1.0).unwrap();
        let inf = general_l1_solve(&u, 1.0, &RegularizerParams::no_short()).unwrap();
        let big = general_l1_solve(&u, 1.0, &RegularizerParams::new(0.0, Penalty::Finite(1e6)).unwrap()).unwrap();
        assert!((inf.lambda - big.lambda).abs() < 1e-4);
    }

    #[test]
    fn eta1_shift_on_noshort() {
        // a penalty on positive weights is a constant under the budget when shorts are banned
        let u = AssetUniverse::new(vec![1.0, 2.0]).unwrap();
        let eta1 = 0.3;
        let a = general_l1_solve(&u, 0.8, &RegularizerParams::new(eta1, Penalty::Infinite).unwrap()).unwrap();
        let b = noshort_solution(&u, 0.8).unwrap();
        assert!((a.lambda - eta1 - b.lambda).abs() < 1e-8);
        assert!((a.delta - b.delta).abs() < 1e-8);
        assert!((a.q0 - b.q0).abs() < 1e-8);
        assert!((a.f - b.f - eta1).abs() < 1e-8);
        assert!((a.f - 0.5 * (a.lambda + eta1)).abs() < 1e-8);
    }

    #[test]
    fn symmetric_l1_penalty() {
        let u = AssetUniverse::new(vec![1.0, 1.5, 2.0]).unwrap();
        let reg = RegularizerParams::new(0.2, Penalty::Finite(0.2)).unwrap();
        for r in [0.3, 0.8, 1.2] {
            let s = general_l1_solve(&u, r, &reg).unwrap();
            check_residuals(&u, r, &reg, &s);
            assert!(s.n0 > 0.0 && s.n0 < 1.0);
            let f = crate::replica::free_energy(&s.order_params(), &u, r, &reg).unwrap();
            assert!((s.f - f).abs() < 1e-8, "r={r}: {} vs {f}", s.f);
        }
    }

    #[test]
    fn refuses_beyond_corners() {
        let u = AssetUniverse::uniform(3, 1.0).unwrap();
        assert!(matches!(
            general_l1_solve(&u, 1.2, &RegularizerParams::unconstrained()),
            Err(Error::PhaseBoundary { .. })
        ));
        assert!(matches!(
            general_l1_solve(&u, 2.0, &RegularizerParams::no_short()),
            Err(Error::CriticalPhase { .. })
        ));
    }
}
