//! Eigenvalues of real square matrices via Schur reduction (Hessenberg +
//! shifted QR, as provided by nalgebra).

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use super::{check_finite, check_square, Mat};
use crate::error::{Error, Result};

/// Eigenvalue list of a real matrix. Complex eigenvalues occur in conjugate
/// pairs; the list is sorted by real part, then imaginary part, so equal
/// inputs produce identical output orderings.
pub type Spectrum = Vec<Complex64>;

/// Computes all eigenvalues of a square matrix.
pub fn eig(m: &Mat) -> Result<Spectrum> {
    check_square(m, "eig")?;
    check_finite(m, "eig")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }

    // The QR iteration's deflation test compares subdiagonal entries
    // against neighbouring diagonal magnitudes, so spectra clustered near
    // zero can stall it indefinitely. A global diagonal shift leaves the
    // Francis iterates unchanged but makes the test effective; the shift is
    // subtracted from the eigenvalues afterwards.
    let shift = 1.0 + super::one_norm(m);
    let shifted = m + Mat::identity(n, n) * shift;

    let max_niter = 100 * n.max(10);
    let mut schur = Schur::try_new(shifted.clone(), f64::EPSILON, max_niter);
    // Rare inputs cycle the Francis shifts without ever deflating. Fixed
    // orthogonal similarities break the cycle while preserving the
    // spectrum, standing in for LAPACK's exceptional shifts.
    for retry in 0..3u64 {
        if schur.is_some() {
            break;
        }
        let q = crate::rng::random_orthogonal(n, 0x5EED_0000 + retry);
        schur = Schur::try_new(q.transpose() * &shifted * q, f64::EPSILON, max_niter);
    }
    let schur = schur.ok_or_else(|| Error::NonConvergence {
        algorithm: "Schur (eigenvalues)",
        dim: n,
        norm: m.norm(),
    })?;

    let mut eigs: Spectrum = schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l - Complex64::new(shift, 0.0))
        .collect();
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eigs)
}

/// Maximum eigenvalue modulus.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eig(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::randn;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn rotation_generator_has_pure_imaginary_pair() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let eigs = eig(&m).unwrap();
        assert!(close(eigs[0], Complex64::new(0.0, -1.0), 1e-12));
        assert!(close(eigs[1], Complex64::new(0.0, 1.0), 1e-12));
    }

    #[test]
    fn upper_triangular_gives_diagonal() {
        let m = Mat::from_row_slice(3, 3, &[2.0, 5.0, -1.0, 0.0, -3.0, 4.0, 0.0, 0.0, 0.5]);
        let eigs = eig(&m).unwrap();
        let expected = [-3.0, 0.5, 2.0];
        for (e, want) in eigs.iter().zip(expected) {
            assert!(close(*e, Complex64::new(want, 0.0), 1e-10));
        }
    }

    #[test]
    fn companion_matrix_matches_polynomial_roots() {
        // Companion matrix of λ² - λ - 1; the oracle is the quadratic formula.
        let m = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let eigs = eig(&m).unwrap();
        let root_lo = (1.0 - 5f64.sqrt()) / 2.0;
        let root_hi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(close(eigs[0], Complex64::new(root_lo, 0.0), 1e-10));
        assert!(close(eigs[1], Complex64::new(root_hi, 0.0), 1e-10));
    }

    #[test]
    fn spectral_radius_scaled_identity() {
        let m = Mat::identity(4, 4) * 0.5;
        assert!((spectral_radius(&m).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn spectral_radius_nilpotent_is_zero() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!(spectral_radius(&m).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(eig(&Mat::zeros(2, 3)).is_err());
    }

    proptest! {
        // Conjugate-pair structure of real-matrix spectra.
        #[test]
        fn conjugate_pairs(seed in 0u64..100) {
            let m = randn(5, 5, seed);
            let eigs = eig(&m).unwrap();
            let mut remaining: Vec<_> = eigs.iter().filter(|l| l.im.abs() > 1e-10).copied().collect();
            while let Some(l) = remaining.pop() {
                let pos = remaining
                    .iter()
                    .position(|c| close(*c, l.conj(), 1e-8));
                prop_assert!(pos.is_some(), "unpaired complex eigenvalue {l}");
                remaining.swap_remove(pos.unwrap());
            }
        }

        // Similarity invariance under well-conditioned transforms.
        #[test]
        fn similarity_invariance(seed in 0u64..100) {
            let m = randn(4, 4, seed);
            // P = I + small perturbation is well conditioned.
            let p = Mat::identity(4, 4) + randn(4, 4, seed ^ 0xABCD) * 0.1;
            let p_inv = p.clone().try_inverse().unwrap();
            let similar = &p_inv * &m * &p;
            let mut a = eig(&m).unwrap();
            let mut b = eig(&similar).unwrap();
            a.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
            b.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(close(*x, *y, 1e-8), "{x} vs {y}");
            }
        }
    }
}
