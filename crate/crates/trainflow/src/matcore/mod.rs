//! Dense real-matrix numerics: SVD, eigenvalues, matrix exponential,
//! pseudoinverse, spectral radius. Everything else in the crate sits on top
//! of these kernels.
//!
//! All operations are pure functions of their inputs; matrices are plain
//! values and safe to share across threads.

mod eig;
mod expm;
mod svd;

pub use eig::{eig, spectral_radius, Spectrum};
pub use expm::matexp;
pub use svd::{pinv, svd, SvdResult};

use crate::error::{Error, Result};

/// Dense real matrix in IEEE double precision. The universal carrier for
/// system matrices, snapshot matrices and orthogonal bases.
pub type Mat = nalgebra::DMatrix<f64>;

/// Column vector companion to [`Mat`].
pub type Vector = nalgebra::DVector<f64>;

pub(crate) fn check_finite(m: &Mat, context: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

pub(crate) fn check_square(m: &Mat, context: &'static str) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::NonSquare {
            context,
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Maximum absolute column sum (induced 1-norm).
pub(crate) fn one_norm(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
