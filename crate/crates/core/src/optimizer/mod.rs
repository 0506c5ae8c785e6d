//! Exact minimum-variance solvers for a single empirical covariance matrix.
//!
//! Both solvers minimize `w'Cw` subject to `Σ w_i = budget`; the no-short
//! solver adds `w >= 0`. Rank-deficient inputs are reported as such through
//! [`QpResult::degenerate`] and [`QpResult::flat_directions`]. No ridge term is
//! ever added to make a singular problem look well posed.

mod active_set;
mod brute;

pub use active_set::min_variance_noshort;
pub use brute::{brute_force_noshort, BRUTE_FORCE_MAX_DIM};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance of [`CovMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_FLOOR · trace` reject the matrix.
const PSD_FLOOR: f64 = 1e-10;
/// Eigenvalues at most `RANK_TOL · λ_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// An optimum below `ZERO_VARIANCE_TOL · trace/N` has zero in-sample variance.
pub const ZERO_VARIANCE_TOL: f64 = 1e-10;
/// Weights at most `WEIGHT_ZERO_TOL · budget/N` in magnitude count as zero.
pub const WEIGHT_ZERO_TOL: f64 = 1e-8;

/// Dense symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    data: DMatrix<f64>,
    from_short_sample: bool,
}

impl CovMatrix {
    /// Checks squareness, finiteness and symmetry; stores the exact symmetric part.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::Matrix(format!("covariance must be square and nonempty, got {}x{}", data.nrows(), data.ncols())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Matrix("covariance has non-finite entries".into()));
        }
        let scale = data.amax();
        let asym = (&data - data.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Matrix(format!("covariance is not symmetric (max asymmetry {asym:e})")));
        }
        let data = (&data + data.transpose()) * 0.5;
        Ok(Self { data, from_short_sample: false })
    }

    /// `Ĉ = X X' / T` from an `N × T` return matrix.
    pub fn from_returns(returns: &DMatrix<f64>) -> Result<Self> {
        let (n, t) = returns.shape();
        if n == 0 || t == 0 {
            return Err(Error::Matrix(format!("return matrix must be nonempty, got {n}x{t}")));
        }
        let mut data = returns * returns.transpose() / t as f64;
        data.fill_upper_triangle_with_lower_triangle();
        Ok(Self { data, from_short_sample: t < n })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// Whether the matrix was estimated from fewer observations than assets.
    pub fn from_short_sample(&self) -> bool {
        self.from_short_sample
    }

    pub fn quadratic_form(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.data * w))
    }

    /// The same matrix multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { data: &self.data * s, from_short_sample: self.from_short_sample }
    }

    pub(crate) fn zero_variance_tol(&self) -> f64 {
        ZERO_VARIANCE_TOL * self.trace().max(0.0) / self.dim() as f64
    }
}

/// Eigen-decomposition with the rank and PSD checks used by every solver.
pub(crate) struct Spectrum {
    pub eig: SymmetricEigen<f64, nalgebra::Dyn>,
    pub threshold: f64,
    pub rank: usize,
}

impl Spectrum {
    pub fn of(c: &CovMatrix) -> Result<Self> {
        let trace = c.trace();
        let eig = SymmetricEigen::new(c.data.clone());
        let min = eig.eigenvalues.min();
        if min < -PSD_FLOOR * trace.abs() || trace < 0.0 {
            return Err(Error::Matrix(format!("covariance is not positive semidefinite (eigenvalue {min:e}, trace {trace:e})")));
        }
        let lam_max = eig.eigenvalues.max().max(0.0);
        let threshold = RANK_TOL * lam_max;
        let rank = eig.eigenvalues.iter().filter(|&&e| e > threshold).count();
        Ok(Self { eig, threshold, rank })
    }

    /// Orthonormal basis of the numerical null space, one column per direction.
    pub fn null_basis(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self
            .eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &e)| e <= self.threshold)
            .map(|(k, _)| self.eig.eigenvectors.column(k).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(self.eig.eigenvalues.len(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// `C⁺ v` restricted to the numerical range.
    pub fn pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let vecs = &self.eig.eigenvectors;
        let mut out = DVector::zeros(v.len());
        for (k, &e) in self.eig.eigenvalues.iter().enumerate() {
            if e > self.threshold {
                let col = vecs.column(k);
                out.axpy(col.dot(v) / e, &col, 1.0);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    /// Budget constraint only.
    Equality,
    /// Budget constraint and `w >= 0`.
    NoShort,
}

/// Solution of one minimum-variance problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub weights: Vec<f64>,
    /// In-sample variance `w'Cw`.
    pub objective: f64,
    /// Indices with `w_i = 0` exactly.
    pub active_set: Vec<usize>,
    /// The optimum has zero in-sample variance.
    pub degenerate: bool,
    /// Null-space directions of the problem restricted to the optimal face.
    pub flat_directions: usize,
    /// False when `weights` is one representative of a continuum of optima.
    pub unique: bool,
    pub constraint: Constraint,
}

pub(crate) fn check_budget(budget: f64) -> Result<()> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::Domain(format!("budget must be positive and finite, got {budget}")));
    }
    Ok(())
}

/// Minimum variance under the budget constraint alone.
///
/// Full rank: the Lagrange solution `w ∝ C⁻¹1`. Rank deficient: the
/// minimum-norm point of the optimal set, flagged non-unique, with
/// `flat_directions = N - rank`.
pub fn min_variance_equality(c: &CovMatrix, budget: f64) -> Result<QpResult> {
    check_budget(budget)?;
    let n = c.dim();
    let spectrum = Spectrum::of(c)?;
    let ones = DVector::from_element(n, 1.0);
    let full_rank = spectrum.rank == n;

    let w = if full_rank {
        let y = match Cholesky::new(c.data.clone()) {
            Some(ch) => ch.solve(&ones),
            None => spectrum.pinv_apply(&ones),
        };
        &y * (budget / y.sum())
    } else {
        let basis = spectrum.null_basis();
        let p1 = &basis * (basis.transpose() * &ones);
        let s = p1.sum();
        if s > 1e-12 * n as f64 {
            // zero-variance portfolios exist; take the shortest one
            &p1 * (budget / s)
        } else {
            // 1 is orthogonal to the null space: the optimum value is positive
            // but any null direction can be added
            let y = spectrum.pinv_apply(&ones);
            &y * (budget / y.sum())
        }
    };

    let objective = c.quadratic_form(&w).max(0.0);
    let weights: Vec<f64> = w.iter().copied().collect();
    let active_set = weights.iter().enumerate().filter(|(_, &x)| x == 0.0).map(|(i, _)| i).collect();
    Ok(QpResult {
        weights,
        objective,
        active_set,
        degenerate: objective <= c.zero_variance_tol(),
        flat_directions: n - spectrum.rank,
        unique: full_rank,
        constraint: Constraint::Equality,
    })
}

/// Largest violation of the optimality conditions of `result` for `(C, budget)`.
///
/// Covers the budget, the sign constraints, stationarity `2Cw = λ1 + μ` on the
/// free coordinates, dual feasibility `μ >= 0` and complementarity `μ_i w_i = 0`
/// on the rest. Under [`Constraint::Equality`] only the first and the
/// stationarity term over all coordinates apply.
pub fn kkt_residual(c: &CovMatrix, result: &QpResult, budget: f64) -> f64 {
    let n = c.dim();
    let w = DVector::from_column_slice(&result.weights);
    let g = c.matrix() * &w * 2.0;
    let mut worst = (w.sum() - budget).abs();
    match result.constraint {
        Constraint::Equality => {
            let lambda = g.mean();
            for gi in g.iter() {
                worst = worst.max((gi - lambda).abs());
            }
        }
        Constraint::NoShort => {
            let zero = WEIGHT_ZERO_TOL * budget / n as f64;
            let free: Vec<usize> = (0..n).filter(|&i| w[i] > zero).collect();
            if free.is_empty() {
                return worst.max(budget);
            }
            let lambda = free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64;
            for i in 0..n {
                let mu = g[i] - lambda;
                worst = worst.max((-w[i]).max(0.0));
                if w[i] > zero {
                    worst = worst.max(mu.abs());
                } else {
                    worst = worst.max((-mu).max(0.0));
                }
                worst = worst.max((mu * w[i]).abs());
            }
        }
    }
    worst
}
