//! Matrix exponential via scaling-and-squaring with a degree-13 Padé
//! approximant (Higham 2005 coefficients).

use super::{check_finite, check_square, one_norm, Mat};
use crate::error::{Error, Result};

/// Largest 1-norm for which the degree-13 Padé approximant alone is
/// accurate to machine precision; above it the argument is scaled down by
/// powers of two and the result squared back up.
const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Computes `exp(M)` for a square matrix.
pub fn matexp(m: &Mat) -> Result<Mat> {
    check_square(m, "matexp")?;
    check_finite(m, "matexp")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }

    let norm = one_norm(m);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings as i32);

    let (u, v) = pade_13(&a);
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::NonConvergence {
            algorithm: "matexp Padé solve",
            dim: n,
            norm,
        })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_13(a: &Mat) -> (Mat, Mat) {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    (u, v)
}
