use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{check_budget, Constraint, CovMatrix, QpResult, Spectrum};
use crate::error::{Error, Result};

/// Multipliers above `-MULTIPLIER_TOL · 2 (trace/N) (budget/N)` count as nonnegative.
const MULTIPLIER_TOL: f64 = 1e-10;
/// Active-set iterations allowed per asset.
const ITERATIONS_PER_ASSET: usize = 50;

/// Minimum variance under the budget constraint and `w >= 0`.
///
/// Primal active-set method started from equal weights. Each iteration moves
/// towards the minimizer of the problem restricted to the current free
/// coordinates and stops at the first coordinate that would turn negative
/// (lowest index on ties). At a restricted minimizer the multipliers of the
/// pinned coordinates are checked and the most negative one is released.
///
/// While the restricted covariance is singular and `1` is not orthogonal to
/// its null space, the restricted minimizer is a zero-variance portfolio; the
/// one closest to the current iterate is used, and the null-space basis is
/// carried from step to step instead of being recomputed.
pub fn min_variance_noshort(c: &CovMatrix, budget: f64) -> Result<QpResult> {
    check_budget(budget)?;
    let n = c.dim();
    let spectrum = Spectrum::of(c)?;
    let cm = c.matrix();
    let tol_mu = MULTIPLIER_TOL * 2.0 * c.trace() / n as f64 * budget / n as f64;

    let mut w = DVector::from_element(n, budget / n as f64);
    let mut free = vec![true; n];
    let mut face = Face { basis: spectrum.null_basis(), current: true, threshold: spectrum.threshold };
    let max_iter = ITERATIONS_PER_ASSET * n;

    for _ in 0..max_iter {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let target = face.target(cm, &idx, &w, budget);

        let mut alpha = 1.0;
        let mut block = None;
        for &i in &idx {
            let d = target[i] - w[i];
            if d < 0.0 {
                let ratio = w[i] / -d;
                if ratio < alpha {
                    alpha = ratio;
                    block = Some(i);
                }
            }
        }
        if let Some(j) = block {
            for &i in &idx {
                w[i] += alpha * (target[i] - w[i]);
            }
            w[j] = 0.0;
            free[j] = false;
            face.pin(j);
            continue;
        }
        for &i in &idx {
            w[i] = target[i];
        }

        let g = cm * &w * 2.0;
        let lambda = idx.iter().map(|&i| g[i]).sum::<f64>() / idx.len() as f64;
        let mut release = None;
        let mut most_negative = -tol_mu;
        for i in (0..n).filter(|&i| !free[i]) {
            let mu = g[i] - lambda;
            if mu < most_negative {
                most_negative = mu;
                release = Some(i);
            }
        }
        match release {
            Some(j) => {
                free[j] = true;
                face.current = false;
            }
            None => {
                let objective = c.quadratic_form(&w).max(0.0);
                let degenerate = objective <= c.zero_variance_tol();
                let flat_directions = if degenerate { n - spectrum.rank } else { face.basis.ncols() };
                let weights: Vec<f64> = w.iter().copied().collect();
                let active_set = weights.iter().enumerate().filter(|(_, &x)| x == 0.0).map(|(i, _)| i).collect();
                return Ok(QpResult {
                    weights,
                    objective,
                    active_set,
                    degenerate,
                    flat_directions,
                    unique: !degenerate && flat_directions == 0,
                    constraint: Constraint::NoShort,
                });
            }
        }
    }
    Err(Error::Solver { iterations: max_iter, weights: w.iter().copied().collect() })
}

/// Null space of the covariance restricted to the free coordinates, stored
/// as orthonormal columns of length `N` with zero rows on pinned coordinates.
struct Face {
    basis: DMatrix<f64>,
    /// False after a coordinate was released and the basis may have grown.
    current: bool,
    threshold: f64,
}

impl Face {
    /// Intersect the null space with `{v_j = 0}`.
    fn pin(&mut self, j: usize) {
        if !self.current || self.basis.ncols() == 0 {
            return;
        }
        let b: DVector<f64> = self.basis.row(j).transpose();
        let norm = b.norm();
        if norm > 1e-12 {
            // Householder reflection sending row j to a multiple of e_1
            let mut h = b.clone();
            h[0] += if b[0] >= 0.0 { norm } else { -norm };
            let hh = h.norm_squared();
            let bh = &self.basis * &h;
            self.basis.ger(-2.0 / hh, &bh, &h, 1.0);
            self.basis = self.basis.clone().remove_column(0);
        }
        self.basis.row_mut(j).fill(0.0);
    }

    fn refresh(&mut self, sub: &DMatrix<f64>, idx: &[usize], n: usize) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let eig = SymmetricEigen::new(sub.clone());
        let null: Vec<usize> = (0..idx.len()).filter(|&k| eig.eigenvalues[k] <= self.threshold).collect();
        let mut basis = DMatrix::zeros(n, null.len());
        for (col, &k) in null.iter().enumerate() {
            for (row, &i) in idx.iter().enumerate() {
                basis[(i, col)] = eig.eigenvectors[(row, k)];
            }
        }
        self.basis = basis;
        self.current = true;
        eig
    }

    /// Minimizer of `w'Cw` over `{Σ w = budget, w_i = 0 off idx}` closest to `w`.
    fn target(&mut self, cm: &DMatrix<f64>, idx: &[usize], w: &DVector<f64>, budget: f64) -> DVector<f64> {
        let n = w.len();
        let scatter = |y: &DVector<f64>| {
            let mut t = DVector::zeros(n);
            for (k, &i) in idx.iter().enumerate() {
                t[i] = y[k];
            }
            t
        };
        let sub = cm.select_rows(idx).select_columns(idx);
        let mut eig = None;

        if self.basis.ncols() == 0 || !self.current {
            if self.basis.ncols() == 0 {
                if let Some(y) = cholesky_direction(&sub, self.threshold) {
                    self.current = true;
                    return scatter(&(&y * (budget / y.sum())));
                }
            }
            eig = Some(self.refresh(&sub, idx, n));
        }

        let ones = DVector::from_element(n, 1.0);
        let bt1 = self.basis.transpose() * &ones;
        let s = bt1.norm_squared();
        if self.basis.ncols() > 0 && s > 1e-10 {
            let pw = &self.basis * (self.basis.transpose() * w);
            let p1 = &self.basis * bt1;
            return &pw + p1 * ((budget - pw.sum()) / s);
        }

        // positive optimum on a singular face: range solution plus the null
        // component of the current iterate
        let eig = eig.unwrap_or_else(|| SymmetricEigen::new(sub.clone()));
        let ones_k = DVector::from_element(idx.len(), 1.0);
        let mut y = DVector::zeros(idx.len());
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            if e > self.threshold {
                let col = eig.eigenvectors.column(k);
                y.axpy(col.dot(&ones_k) / e, &col, 1.0);
            }
        }
        let t = scatter(&(&y * (budget / y.sum())));
        let shift = &self.basis * (self.basis.transpose() * (w - &t));
        t + shift
    }
}

/// `C_FF⁻¹ 1` when the Cholesky pivots stay above the rank threshold.
fn cholesky_direction(sub: &DMatrix<f64>, threshold: f64) -> Option<DVector<f64>> {
    let ch = Cholesky::new(sub.clone())?;
    let l = ch.l_dirty();
    if (0..sub.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= threshold) {
        return None;
    }
    let y = ch.solve(&DVector::from_element(sub.nrows(), 1.0));
    (y.sum() > 0.0).then_some(y)
}
