//! The basis `W_ij = E_ij - eps_i eps_j E_ji` of `o_nu(n)` and its algebra.
//!
//! Indices are 0-based throughout.

use nalgebra::DMatrix;

use super::{AlgebraElement, GroupElement, Signature};
use crate::error::{Error, Result};

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    if i < j && j < n {
        Ok(())
    } else {
        Err(Error::IndexOrder { i, j, n })
    }
}

/// `W_ij` with integer entries.
pub fn lie_basis_exact(i: usize, j: usize, sig: Signature) -> Result<DMatrix<i64>> {
    let n = sig.n();
    check_pair(i, j, n)?;
    let mut w = DMatrix::zeros(n, n);
    w[(i, j)] = 1;
    w[(j, i)] = -sig.sign_i64(i) * sig.sign_i64(j);
    Ok(w)
}

/// `W_ij = E_ij - eps_i eps_j E_ji`.
pub fn lie_basis(i: usize, j: usize, sig: Signature) -> Result<AlgebraElement> {
    let w = lie_basis_exact(i, j, sig)?.map(|v| v as f64);
    Ok(AlgebraElement::new_unchecked(w, sig))
}

/// Closed-form `[W_ij, W_kl]` in integer arithmetic.
pub fn commutator_w_exact(i: usize, j: usize, k: usize, l: usize, sig: Signature) -> Result<DMatrix<i64>> {
    let n = sig.n();
    check_pair(i, j, n)?;
    check_pair(k, l, n)?;
    let e = |a: usize| sig.sign_i64(a);
    let eeee = e(i) * e(j) * e(k) * e(l);
    let mut m = DMatrix::<i64>::zeros(n, n);
    if j == k {
        m[(i, l)] += 1;
        m[(l, i)] -= eeee;
    }
    if i == l {
        m[(k, j)] -= 1;
        m[(j, k)] += eeee;
    }
    if i == k {
        m[(j, l)] -= e(i) * e(j);
        m[(l, j)] += e(k) * e(l);
    }
    if j == l {
        m[(k, i)] += e(i) * e(j);
        m[(i, k)] -= e(k) * e(l);
    }
    Ok(m)
}

/// `W_ij W_kl - W_kl W_ij` by direct multiplication.
pub fn commutator_w_direct(i: usize, j: usize, k: usize, l: usize, sig: Signature) -> Result<DMatrix<i64>> {
    let a = lie_basis_exact(i, j, sig)?;
    let b = lie_basis_exact(k, l, sig)?;
    Ok(&a * &b - &b * &a)
}

/// Closed-form `[W_ij, W_kl]`.
pub fn commutator_w(i: usize, j: usize, k: usize, l: usize, sig: Signature) -> Result<DMatrix<f64>> {
    Ok(commutator_w_exact(i, j, k, l, sig)?.map(|v| v as f64))
}

/// Coefficients `c_rs` (`r < s`) of a right-translated basis field
/// `W_ij A` expressed in the left-translated fields `A W_rs`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisCoefficients {
    n: usize,
    coeffs: Vec<((usize, usize), f64)>,
}

impl BasisCoefficients {
    /// `c_rs`, or `None` unless `r < s < n`.
    pub fn get(&self, r: usize, s: usize) -> Option<f64> {
        self.coeffs.iter().find(|(key, _)| *key == (r, s)).map(|(_, c)| *c)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.coeffs.iter().copied()
    }

    /// `sum_{r<s} c_rs A W_rs`.
    pub fn reconstruct(&self, a: &GroupElement) -> DMatrix<f64> {
        let sig = a.signature();
        let mut sum = DMatrix::zeros(self.n, self.n);
        for ((r, s), c) in self.iter() {
            if c != 0.0 {
                let w = lie_basis(r, s, sig).expect("stored pairs are ordered");
                sum += (a.matrix() * w.matrix()) * c;
            }
        }
        sum
    }
}

/// `W_ij A = sum_{r<s} eps_i eps_r (a_js a_ir - a_is a_jr) A W_rs`.
pub fn left_right_convert(a: &GroupElement, i: usize, j: usize) -> Result<BasisCoefficients> {
    let sig = a.signature();
    let n = sig.n();
    check_pair(i, j, n)?;
    let m = a.matrix();
    let mut coeffs = Vec::with_capacity(n * (n - 1) / 2);
    for r in 0..n {
        for s in r + 1..n {
            let c = sig.sign(i) * sig.sign(r) * (m[(j, s)] * m[(i, r)] - m[(i, s)] * m[(j, r)]);
            coeffs.push(((r, s), c));
        }
    }
    Ok(BasisCoefficients { n, coeffs })
}
