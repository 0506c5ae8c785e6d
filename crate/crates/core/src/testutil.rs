//! Numerical oracles shared by the unit tests.

use std::f64::consts::PI;

/// Nodes and weights of the 20-point Gauss-Legendre rule on [-1, 1].
fn legendre_rule() -> ([f64; 20], [f64; 20]) {
    const M: usize = 20;
    let mut nodes = [0.0; M];
    let mut wts = [0.0; M];
    for i in 0..M {
        let mut z = (PI * (i as f64 + 0.75) / (M as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=M {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = M as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        wts[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, wts)
}

/// Composite Gauss-Legendre quadrature with panels no wider than `width`.
pub fn quad_with(f: &dyn Fn(f64) -> f64, a: f64, b: f64, width: f64) -> f64 {
    let (nodes, wts) = legendre_rule();
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (z, w) in nodes.iter().zip(&wts) {
            total += 0.5 * h * w * f(mid + 0.5 * h * z);
        }
    }
    total
}

pub fn quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quad_with(f, a, b, 0.5)
}

#[test]
fn integrates_polynomials_and_gaussians() {
    assert!((quad(&|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0) - (255.0 / 8.0 - 9.0)).abs() < 1e-12);
    let g = quad(&|x| (-0.5 * x * x).exp(), -40.0, 40.0);
    assert!((g - (2.0 * PI).sqrt()).abs() < 1e-13);
}
