use nalgebra::DVector;

use super::Signature;
use crate::error::{Error, Result};

/// Orthonormal vectors `f_i` with `<f_i, f_j> = signs[i] delta_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalFrame {
    pub vectors: Vec<DVector<f64>>,
    pub signs: Vec<f64>,
    /// Input indices in the order they were used as pivots, or `None` if a
    /// null pair had to be combined.
    pub pivots: Option<Vec<usize>>,
}

impl OrthonormalFrame {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn timelike_count(&self) -> usize {
        self.signs.iter().filter(|s| **s < 0.0).count()
    }

    /// Reorders the frame so timelike vectors come first, keeping relative order.
    fn sort_timelike_first(&mut self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by_key(|&k| self.signs[k] > 0.0);
        self.vectors = idx.iter().map(|&k| self.vectors[k].clone()).collect();
        self.signs = idx.iter().map(|&k| self.signs[k]).collect();
        if let Some(p) = &self.pivots {
            self.pivots = Some(idx.iter().map(|&k| p[k]).collect());
        }
    }
}

/// Gram–Schmidt with causal pivoting under the form `J` of `sig`.
///
/// Output is ordered timelike-first. Linearly dependent inputs are dropped,
/// so the span is preserved.
pub fn indefinite_orthonormalize(vectors: &[DVector<f64>], sig: Signature, tol: f64) -> Result<OrthonormalFrame> {
    for v in vectors {
        crate::error::check_dim(sig.n(), v.len())?;
    }
    let mut frame = orthonormalize_with(vectors, |a, b| sig.dot(a, b), tol)?;
    frame.sort_timelike_first();
    Ok(frame)
}

/// Gram–Schmidt with causal pivoting under an arbitrary symmetric form.
///
/// At each step the remaining vector with the largest `|<v, v>|` is used. If
/// all remaining vectors are null but two of them pair non-trivially, their
/// sum or difference is used instead. Output is in pivot order.
pub fn orthonormalize_with<F>(vectors: &[DVector<f64>], inner: F, tol: f64) -> Result<OrthonormalFrame>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let scale = vectors.iter().map(|v| v.amax()).fold(1.0, f64::max);
    let zero_tol = tol * scale;
    let mut remaining: Vec<(usize, DVector<f64>)> =
        vectors.iter().cloned().enumerate().filter(|(_, v)| v.amax() > zero_tol).collect();
    let mut out = Vec::new();
    let mut signs = Vec::new();
    let mut pivots = Some(Vec::new());

    while !remaining.is_empty() {
        // First maximal candidate, so ties keep the input order.
        let mut best = 0;
        let mut square = inner(&remaining[0].1, &remaining[0].1);
        for (k, (_, v)) in remaining.iter().enumerate().skip(1) {
            let q = inner(v, v);
            if q.abs() > square.abs() {
                best = k;
                square = q;
            }
        }
        let pivot = if square.abs() > tol {
            let (orig, v) = remaining.remove(best);
            if let Some(p) = pivots.as_mut() {
                p.push(orig);
            }
            v
        } else {
            pivots = None;
            combine_null_pair(&mut remaining, &inner, tol)?
        };
        let q = inner(&pivot, &pivot);
        let sign = q.signum();
        let f = pivot / q.abs().sqrt();
        for (_, v) in remaining.iter_mut() {
            let c = sign * inner(v, &f);
            v.axpy(-c, &f, 1.0);
        }
        remaining.retain(|(_, v)| v.amax() > zero_tol);
        out.push(f);
        signs.push(sign);
    }
    Ok(OrthonormalFrame { vectors: out, signs, pivots })
}

fn combine_null_pair<F>(remaining: &mut Vec<(usize, DVector<f64>)>, inner: &F, tol: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut best: Option<(usize, usize, f64)> = None;
    for a in 0..remaining.len() {
        for b in a + 1..remaining.len() {
            let p = inner(&remaining[a].1, &remaining[b].1);
            if best.map_or(true, |(_, _, q)| p.abs() > q.abs()) {
                best = Some((a, b, p));
            }
        }
    }
    match best {
        Some((a, b, p)) if p.abs() > tol => {
            let v = &remaining[a].1 + &remaining[b].1 * p.signum();
            remaining.remove(a);
            Ok(v)
        }
        _ => Err(Error::DegenerateSubspace),
    }
}

/// Gram–Schmidt in the given order, without pivoting.
///
/// Used where the frame must vary smoothly with the inputs; fails with
/// `DegenerateSubspace` when a pivot is not clearly non-null.
pub fn orthonormalize_in_order<F>(vectors: &[DVector<f64>], inner: F, tol: f64) -> Result<OrthonormalFrame>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    let mut signs = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for (f, s) in out.iter().zip(&signs) {
            let c: f64 = *s * inner(&w, f);
            w.axpy(-c, f, 1.0);
        }
        let q = inner(&w, &w);
        if q.abs() <= tol {
            return Err(Error::DegenerateSubspace);
        }
        signs.push(q.signum());
        out.push(w / q.abs().sqrt());
    }
    Ok(OrthonormalFrame { vectors: out, signs, pivots: Some((0..vectors.len()).collect()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn lor3() -> Signature {
        Signature::new(3, 1).unwrap()
    }

    fn check_orthonormal(frame: &OrthonormalFrame, sig: Signature) {
        for (a, fa) in frame.vectors.iter().enumerate() {
            for (b, fb) in frame.vectors.iter().enumerate() {
                let expected = if a == b { frame.signs[a] } else { 0.0 };
                assert!((sig.dot(fa, fb) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standard_basis_is_fixed() {
        let basis: Vec<_> = (0..3).map(|i| DVector::from_fn(3, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
        let f = indefinite_orthonormalize(&basis, lor3(), 1e-12).unwrap();
        assert_eq!(f.signs, vec![-1.0, 1.0, 1.0]);
        for (v, e) in f.vectors.iter().zip(&basis) {
            assert!((v - e).amax() < 1e-15);
        }
    }

    #[test]
    fn null_first_input() {
        let vs = [dvector![1.0, 1.0, 0.0], dvector![0.0, 1.0, 0.0], dvector![0.0, 0.0, 1.0]];
        let f = indefinite_orthonormalize(&vs, lor3(), 1e-12).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.signs, vec![-1.0, 1.0, 1.0]);
        check_orthonormal(&f, lor3());
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let vs = [dvector![1.0, 1.0, 0.0], dvector![1.0, 1.0, 1.0]];
        assert_eq!(indefinite_orthonormalize(&vs, lor3(), 1e-12), Err(Error::DegenerateSubspace));
    }

    #[test]
    fn two_null_vectors_span_a_lorentz_plane() {
        let vs = [dvector![1.0, 1.0, 0.0], dvector![1.0, -1.0, 0.0]];
        let f = indefinite_orthonormalize(&vs, lor3(), 1e-12).unwrap();
        assert_eq!(f.signs, vec![-1.0, 1.0]);
        assert!(f.pivots.is_none());
        check_orthonormal(&f, lor3());
    }

    #[test]
    fn dependent_inputs_are_dropped() {
        let vs = [dvector![0.0, 1.0, 0.0], dvector![0.0, 2.0, 0.0], dvector![1.0, 0.0, 0.0]];
        let f = indefinite_orthonormalize(&vs, lor3(), 1e-12).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.pivots, Some(vec![2, 1]));
    }

    #[test]
    fn in_order_keeps_order() {
        let s = lor3();
        let vs = [dvector![0.0, 1.0, 0.0], dvector![2.0, 0.3, 0.0]];
        let f = orthonormalize_in_order(&vs, |a, b| s.dot(a, b), 1e-12).unwrap();
        assert_eq!(f.signs, vec![1.0, -1.0]);
        check_orthonormal(&f, s);
        assert!(orthonormalize_in_order(&[dvector![1.0, 1.0, 0.0]], |a, b| s.dot(a, b), 1e-12).is_err());
    }
}
