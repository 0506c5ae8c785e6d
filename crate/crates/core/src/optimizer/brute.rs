use nalgebra::{DVector, SymmetricEigen};

use super::{check_budget, Constraint, CovMatrix, QpResult, Spectrum};
use crate::error::{Error, Result};

/// Largest dimension [`brute_force_noshort`] accepts.
pub const BRUTE_FORCE_MAX_DIM: usize = 12;

/// Reference solution of the no-short problem by enumerating every support.
///
/// For each nonempty support `S` the restricted problem is solved directly:
/// with `C_SS` nonsingular its Lagrange solution is a candidate if it is
/// nonnegative; with a one-dimensional null space the normalized null vector
/// is a zero-variance candidate if it has a single sign. Every optimum of the
/// full problem is attained at one of these, so the best candidate is exact.
pub fn brute_force_noshort(c: &CovMatrix, budget: f64) -> Result<QpResult> {
    check_budget(budget)?;
    let n = c.dim();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::Domain(format!("brute force is limited to {BRUTE_FORCE_MAX_DIM} assets, got {n}")));
    }
    let spectrum = Spectrum::of(c)?;
    let threshold = spectrum.threshold;
    let cm = c.matrix();
    let neg_tol = 1e-12 * budget;

    let mut best: Option<(f64, DVector<f64>, usize)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let eig = SymmetricEigen::new(cm.select_rows(&idx).select_columns(&idx));
        let null: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] <= threshold).collect();
        let ones = DVector::from_element(k, 1.0);

        let y = match null.len() {
            0 => {
                let mut y = DVector::zeros(k);
                for (j, &e) in eig.eigenvalues.iter().enumerate() {
                    let col = eig.eigenvectors.column(j);
                    y.axpy(col.dot(&ones) / e, &col, 1.0);
                }
                y
            }
            1 => eig.eigenvectors.column(null[0]).into_owned(),
            _ => continue,
        };
        let s = y.sum();
        if s.abs() < 1e-12 {
            continue;
        }
        let y = y * (budget / s);
        if y.iter().any(|&v| v < -neg_tol) {
            continue;
        }
        let mut w = DVector::zeros(n);
        for (j, &i) in idx.iter().enumerate() {
            w[i] = y[j].max(0.0);
        }
        let objective = c.quadratic_form(&w).max(0.0);
        if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
            best = Some((objective, w, null.len()));
        }
    }

    let (objective, w, null_dim) = best.ok_or_else(|| Error::Matrix("no feasible support found".into()))?;
    let degenerate = objective <= c.zero_variance_tol();
    let flat_directions = if degenerate { n - spectrum.rank } else { null_dim };
    let weights: Vec<f64> = w.iter().copied().collect();
    let active_set = weights.iter().enumerate().filter(|(_, &x)| x == 0.0).map(|(i, _)| i).collect();
    Ok(QpResult {
        weights,
        objective,
        active_set,
        degenerate,
        flat_directions,
        unique: !degenerate && flat_directions == 0,
        constraint: Constraint::NoShort,
    })
}
