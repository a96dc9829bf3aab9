use nalgebra::DMatrix;

use super::{algebra_residual, check_square, AlgebraElement, GroupElement, Signature};
use crate::error::{Error, Result};

const PADE_ORDER: usize = 8;

/// Largest 1-norm handed to the rational approximant after scaling.
const SCALED_NORM: f64 = 0.5;

fn pade_coefficients() -> [f64; PADE_ORDER + 1] {
    let m = PADE_ORDER as f64;
    let mut c = [0.0; PADE_ORDER + 1];
    c[0] = 1.0;
    for k in 1..=PADE_ORDER {
        let kf = k as f64;
        c[k] = c[k - 1] * (m - kf + 1.0) / (kf * (2.0 * m - kf + 1.0));
    }
    c
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the `[8/8]` diagonal
/// Padé approximant.
///
/// The diagonal approximant maps `o_nu(n)` into `O_nu(n)` exactly, so the
/// only group defect comes from rounding.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm: matrix must be square");
    let n = a.nrows();
    let norm = norm1(a);
    let s = if norm > SCALED_NORM { (norm / SCALED_NORM).log2().ceil() as i32 } else { 0 };
    let scaled = a * 2f64.powi(-s);

    let c = pade_coefficients();
    let mut num = DMatrix::identity(n, n) * c[0];
    let mut den = num.clone();
    let mut power = DMatrix::identity(n, n);
    for (k, ck) in c.iter().enumerate().skip(1) {
        power = &power * &scaled;
        num += &power * *ck;
        if k % 2 == 0 {
            den += &power * *ck;
        } else {
            den -= &power * *ck;
        }
    }
    let mut x = den.lu().solve(&num).expect("Padé denominator is invertible for small norms");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// `exp(A)` for a matrix in `o_nu(n)`; rejects inputs whose algebra
/// residual exceeds `tol`.
pub fn matrix_exp(a: &DMatrix<f64>, sig: Signature, tol: f64) -> Result<GroupElement> {
    check_square(a, sig)?;
    let residual = algebra_residual(a, sig);
    if residual > tol {
        return Err(Error::AlgebraConstraint { residual });
    }
    Ok(GroupElement::new_unchecked(expm(a), sig))
}

impl AlgebraElement {
    pub fn exp(&self) -> GroupElement {
        GroupElement::new_unchecked(expm(self.matrix()), self.signature())
    }
}
