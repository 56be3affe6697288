//! Full singular value decomposition and the Moore–Penrose pseudoinverse.

use super::{check_finite, Mat};
use crate::error::{Error, Result};

/// Full SVD of a real matrix: `M = U · Σ · Vᵀ` with square orthogonal
/// factors, plus the numerical rank under the tolerance that was applied.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, `rows × rows` orthogonal.
    pub u: Mat,
    /// Singular values sorted in descending order, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, `cols × cols` orthogonal.
    pub v: Mat,
    /// Count of singular values strictly above `tolerance`.
    pub rank: usize,
    /// The tolerance actually used for the rank decision.
    pub tolerance: f64,
}

impl SvdResult {
    /// Reconstructs `U · Σ · Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let rows = self.u.nrows();
        let cols = self.v.nrows();
        let k = self.singular_values.len();
        let mut sigma = Mat::zeros(rows, cols);
        for (i, s) in self.singular_values.iter().enumerate().take(k) {
            sigma[(i, i)] = *s;
        }
        &self.u * sigma * self.v.transpose()
    }
}

/// Default numerical-rank tolerance: `max(rows, cols) · ε · σ_max`.
pub fn default_rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Computes the full SVD. A `tol` of 0 selects the default rank tolerance.
pub fn svd(m: &Mat, tol: f64) -> Result<SvdResult> {
    check_finite(m, "svd")?;
    if tol < 0.0 {
        return Err(Error::Config(format!("svd tolerance must be >= 0, got {tol}")));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Config("svd requires a non-empty matrix".into()));
    }

    let max_niter = 200 * rows.max(cols).max(10);
    let thin = m
        .clone()
        .try_svd(true, true, f64::EPSILON, max_niter)
        .ok_or_else(|| Error::NonConvergence {
            algorithm: "SVD",
            dim: rows.max(cols),
            norm: m.norm(),
        })?;

    let u_thin = thin.u.expect("u requested");
    let v_thin = thin.v_t.expect("v_t requested").transpose();
    let singular_values: Vec<f64> = thin.singular_values.iter().copied().collect();

    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tolerance = if tol == 0.0 {
        default_rank_tolerance(rows, cols, sigma_max)
    } else {
        tol
    };
    let rank = singular_values.iter().filter(|s| **s > tolerance).count();

    Ok(SvdResult {
        u: complete_orthonormal(&u_thin),
        singular_values,
        v: complete_orthonormal(&v_thin),
        rank,
        tolerance,
    })
}

/// Moore–Penrose pseudoinverse via SVD with rank truncation at `tol`
/// (0 = default tolerance).
pub fn pinv(m: &Mat, tol: f64) -> Result<Mat> {
    let f = svd(m, tol)?;
    let (rows, cols) = m.shape();
    let mut sigma_pinv = Mat::zeros(rows, cols);
    for i in 0..f.rank {
        sigma_pinv[(i, i)] = 1.0 / f.singular_values[i];
    }
    Ok(&f.v * sigma_pinv.transpose() * f.u.transpose())
}

/// Extends a matrix with orthonormal columns to a full square orthogonal
/// matrix whose leading columns are the input, by repeatedly adjoining the
/// standard basis vector with the largest component outside the current
/// span. Residuals of all candidates are kept up to date incrementally, so
/// the whole completion is O(dim³).
fn complete_orthonormal(q_thin: &Mat) -> Mat {
    let dim = q_thin.nrows();
    let k = q_thin.ncols();
    debug_assert!(k <= dim);
    if k == dim {
        return q_thin.clone();
    }

    let mut q = Mat::zeros(dim, dim);
    q.view_mut((0, 0), (dim, k)).copy_from(q_thin);

    // residuals column i = (I - Q·Qᵀ)·e_i for the current basis.
    let mut residuals = Mat::identity(dim, dim) - q_thin * q_thin.transpose();
    let mut used = vec![false; dim];

    for filled in k..dim {
        // The trace identity sum_i ‖residual_i‖² = dim - filled guarantees
        // the best candidate has residual norm² >= (dim - filled)/dim.
        let (idx, _) = used
            .iter()
            .enumerate()
            .filter(|(_, taken)| !**taken)
            .map(|(i, _)| (i, residuals.column(i).norm_squared()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one basis candidate remains");
        used[idx] = true;

        let mut v = residuals.column(idx).into_owned();
        // One extra Gram-Schmidt pass keeps orthogonality at machine
        // precision even for middling residuals.
        let coeffs = q.columns(0, filled).transpose() * &v;
        v -= q.columns(0, filled) * coeffs;
        let norm = v.norm();
        debug_assert!(norm > 1e-8, "degenerate completion candidate");
        v /= norm;
        q.set_column(filled, &v);

        // Deflate the new direction out of every remaining candidate.
        let projections = v.transpose() * &residuals;
        for i in 0..dim {
            if !used[i] {
                let scale = projections[(0, i)];
                let mut col = residuals.column_mut(i);
                col.axpy(-scale, &v, 1.0);
            }
        }
    }
    q
}
