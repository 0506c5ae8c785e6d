//! The standard normal density and its iterated integrals.
//!
//! ```text
//! Φ(x) = ∫_{-∞}^x φ(t) dt,   Ψ(x) = ∫_{-∞}^x Φ(t) dt,   W(x) = ∫_{-∞}^x Ψ(t) dt
//! ```
//!
//! Closed forms: `Ψ(x) = xΦ(x) + φ(x)` and `W(x) = ½(x²+1)Φ(x) + ½xφ(x)`.
//! Both cancel catastrophically in the left tail, so for `x < -3` the ratios
//! `Ψ/Φ` and `W/Ψ` are taken from the continued fraction of the repeated
//! normal tail integrals instead, which keeps full relative accuracy down to
//! the underflow threshold.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1/√(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this magnitude the asymptotic branches are returned.
const ASYMPTOTIC_CUTOFF: f64 = 40.0;

/// Below this argument the tail continued fraction is used.
const TAIL_SWITCH: f64 = -3.0;

/// Depth of the backward recurrence for the tail ratios. Converged to
/// machine precision for every `t >= 3`.
const TAIL_DEPTH: usize = 160;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ.
#[doc(alias = "Phi")]
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    if x > ASYMPTOTIC_CUTOFF {
        1.0
    } else if x < -ASYMPTOTIC_CUTOFF {
        0.0
    } else {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }
}

/// First iterated integral of Φ.
#[doc(alias = "Psi")]
pub fn cdf_integral(x: f64) -> f64 {
    if x > ASYMPTOTIC_CUTOFF {
        x
    } else if x < -ASYMPTOTIC_CUTOFF {
        0.0
    } else if x < TAIL_SWITCH {
        let (rho1, _) = tail_ratios(-x);
        rho1 * normal_cdf(x)
    } else {
        x * normal_cdf(x) + normal_pdf(x)
    }
}

/// Second iterated integral of Φ.
#[doc(alias = "W")]
pub fn cdf_double_integral(x: f64) -> f64 {
    if x > ASYMPTOTIC_CUTOFF {
        0.5 * (x * x + 1.0)
    } else if x < -ASYMPTOTIC_CUTOFF {
        0.0
    } else if x < TAIL_SWITCH {
        let (rho1, rho2) = tail_ratios(-x);
        rho2 * rho1 * normal_cdf(x)
    } else {
        0.5 * (x * x + 1.0) * normal_cdf(x) + 0.5 * x * normal_pdf(x)
    }
}

/// All three of Φ, Ψ, W at one argument, sharing the expensive pieces.
pub fn cdf_and_integrals(x: f64) -> (f64, f64, f64) {
    if x > ASYMPTOTIC_CUTOFF {
        (1.0, x, 0.5 * (x * x + 1.0))
    } else if x < -ASYMPTOTIC_CUTOFF {
        (0.0, 0.0, 0.0)
    } else if x < TAIL_SWITCH {
        let cdf = normal_cdf(x);
        let (rho1, rho2) = tail_ratios(-x);
        let psi = rho1 * cdf;
        (cdf, psi, rho2 * psi)
    } else {
        let cdf = normal_cdf(x);
        let pdf = normal_pdf(x);
        (cdf, x * cdf + pdf, 0.5 * (x * x + 1.0) * cdf + 0.5 * x * pdf)
    }
}

/// Ratios `J1/J0` and `J2/J1` of the repeated tail integrals
/// `J_n(t) = ∫_t^∞ (s-t)^n/n! φ(s) ds`, which satisfy
/// `n J_n = J_{n-2} - t J_{n-1}`. With `ρ_n = J_n / J_{n-1}` this gives
/// `ρ_{n-1} = 1 / (t + n ρ_n)`, stable when run backwards.
fn tail_ratios(t: f64) -> (f64, f64) {
    debug_assert!(t > 0.0);
    let mut rho = 0.0;
    let mut rho2 = 0.0;
    for n in (2..=TAIL_DEPTH).rev() {
        rho = 1.0 / (t + n as f64 * rho);
        if n == 3 {
            rho2 = rho;
        }
    }
    // loop leaves ρ_1 in `rho`; ρ_2 was captured at n = 3
    (rho, rho2)
}

/// Standard normal quantile for `p` in (0, 1).
///
/// Acklam's rational approximation polished by two Halley steps on Φ.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument {p} outside (0, 1)");
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p_low = 0.024_25;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        // work in the smaller tail so the residual keeps relative accuracy
        let e = if x < 0.0 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - normal_cdf(-x)
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::quad;
    use proptest::prelude::*;

    // Cauchy's repeated-integration formula turns the iterated integrals
    // into single quadratures of the density.
    fn phi_quad(x: f64) -> f64 {
        quad(&normal_pdf, x - 40.0, x)
    }
    fn psi_quad(x: f64) -> f64 {
        quad(&|t| (x - t) * normal_pdf(t), x - 40.0, x)
    }
    fn w_quad(x: f64) -> f64 {
        quad(&|t| 0.5 * (x - t) * (x - t) * normal_pdf(t), x - 40.0, x)
    }

    #[test]
    fn pdf_values() {
        assert_eq!(normal_pdf(0.0), 0.398_942_280_401_432_7);
        assert_eq!(normal_pdf(1.3), normal_pdf(-1.3));
        let total = quad(&normal_pdf, -40.0, 40.0);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(8.0) - 1.0).abs() < 1e-15);
        assert!((normal_cdf(1.0) - phi_quad(1.0)).abs() < 1e-13);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn psi_values() {
        assert_eq!(cdf_integral(0.0), normal_pdf(0.0));
        assert!((cdf_integral(0.0) - psi_quad(0.0)).abs() < 1e-13);
        for x in [5.0, 8.0, 12.0] {
            assert!((cdf_integral(x) - x - psi_quad(x) + x).abs() < 1e-12);
            assert!(cdf_integral(x) - x < 2e-6);
        }
        assert!(cdf_integral(-8.0) < 1e-14);
        assert!(cdf_integral(-8.0) > 0.0);
    }

    #[test]
    fn w_values() {
        assert_eq!(cdf_double_integral(0.0), 0.25);
        assert!((cdf_double_integral(3.0) - w_quad(3.0)).abs() < 1e-9);
        assert!((cdf_double_integral(3.0) - 4.999_898_282_459_757).abs() < 1e-14);
        assert!((cdf_double_integral(1.0) - w_quad(1.0)).abs() < 1e-12);
    }

    #[test]
    fn left_tail_has_relative_accuracy() {
        // high-precision reference values
        let cases = [
            (-3.0, 3.821_543_170_477_236e-4, 1.017_175_402_434_618_6e-4),
            (-5.0, 5.346_165_533_832_815e-8, 9.671_647_593_776_582e-9),
            (-10.0, 7.474_560_254_589_328e-25, 7.264_638_478_559_901e-26),
            (-20.0, 1.370_012_494_729_58e-90, 6.799_564_573_536_904e-92),
            (-35.0, 3.208_804_482_602_476_7e-270, 9.145_687_807_696_884e-272),
        ];
        for (x, psi, w) in cases {
            let rel_psi = (cdf_integral(x) / psi - 1.0).abs();
            let rel_w = (cdf_double_integral(x) / w - 1.0).abs();
            assert!(rel_psi < 1e-13, "Psi({x}) rel err {rel_psi}");
            assert!(rel_w < 1e-13, "W({x}) rel err {rel_w}");
        }
    }

    #[test]
    fn branches_join_continuously() {
        let x = TAIL_SWITCH;
        let (rho1, rho2) = tail_ratios(-x);
        let psi_cf = rho1 * normal_cdf(x);
        let w_cf = rho2 * psi_cf;
        let psi_direct = x * normal_cdf(x) + normal_pdf(x);
        let w_direct = 0.5 * (x * x + 1.0) * normal_cdf(x) + 0.5 * x * normal_pdf(x);
        assert!((psi_cf / psi_direct - 1.0).abs() < 1e-13);
        assert!((w_cf / w_direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-300, 1e-20, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-12] {
            let x = normal_quantile(p);
            let back = if x < 0.0 { normal_cdf(x) } else { 1.0 - normal_cdf(-x) };
            assert!((back / p - 1.0).abs() < 1e-10, "p={p} x={x} back={back}");
        }
    }

    #[test]
    fn combined_matches_individual() {
        for x in [-45.0, -20.0, -3.5, -1.0, 0.0, 2.0, 41.0] {
            let (a, b, c) = cdf_and_integrals(x);
            assert_eq!(a, normal_cdf(x));
            assert_eq!(b, cdf_integral(x));
            assert_eq!(c, cdf_double_integral(x));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn w_reflection_identity(x in -10.0f64..10.0) {
            let lhs = cdf_double_integral(x) + cdf_double_integral(-x);
            prop_assert!((lhs - 0.5 * (x * x + 1.0)).abs() < 1e-12);
        }

        #[test]
        fn w_psi_identity(x in -10.0f64..10.0) {
            let w = cdf_double_integral(x);
            let rhs = 0.5 * x * cdf_integral(x) + 0.5 * normal_cdf(x);
            prop_assert!((w - rhs).abs() < 1e-12);
        }

        #[test]
        fn ranges_and_symmetry(x in -60.0f64..60.0) {
            let c = normal_cdf(x);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(cdf_integral(x) >= 0.0);
            prop_assert!(cdf_double_integral(x) >= 0.0);
            if x.abs() < 30.0 {
                prop_assert!(cdf_double_integral(x) > 0.0);
                prop_assert!((c + normal_cdf(-x) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn monotone_on_grid() {
        let mut prev = (0.0, 0.0, 0.0);
        for k in 0..=20_000 {
            let x = -50.0 + k as f64 * 0.005;
            let cur = cdf_and_integrals(x);
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.2 >= prev.2, "x = {x}");
            prev = cur;
        }
    }
}
