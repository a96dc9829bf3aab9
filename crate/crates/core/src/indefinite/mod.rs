//! Signature-aware linear algebra on `R^n_nu`.
//!
//! Everything here works with the Gram matrix `J = diag(-I_nu, I_{n-nu})`:
//! the scalar product `<x, y>_J = x^t J y`, the pseudo-orthogonal group
//! `O_nu(n) = { X : X^t J X = J }` and its Lie algebra
//! `o_nu(n) = { A : A^t J = -J A }`.

mod basis;
mod expm;
mod frame;

pub use basis::{
    commutator_w, commutator_w_direct, commutator_w_exact, left_right_convert, lie_basis,
    lie_basis_exact, BasisCoefficients,
};
pub use expm::{expm, matrix_exp};
pub use frame::{indefinite_orthonormalize, orthonormalize_in_order, orthonormalize_with, OrthonormalFrame};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default absolute tolerance used to decide that a quadratic form vanishes.
pub const DEFAULT_NULL_TOL: f64 = 1e-9;

/// Default tolerance for group and algebra membership checks.
pub const DEFAULT_GROUP_TOL: f64 = 1e-9;

/// Dimension `n` and index `nu` of a pseudo-Euclidean space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSignature")]
pub struct Signature {
    n: usize,
    nu: usize,
}

#[derive(Deserialize)]
struct RawSignature {
    n: usize,
    nu: usize,
}

impl TryFrom<RawSignature> for Signature {
    type Error = Error;

    fn try_from(raw: RawSignature) -> Result<Self> {
        Signature::new(raw.n, raw.nu)
    }
}

impl Signature {
    pub fn new(n: usize, nu: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Signature("dimension must be positive".into()));
        }
        if nu > n {
            return Err(Error::Signature(format!("index {nu} exceeds dimension {n}")));
        }
        Ok(Self { n, nu })
    }

    /// Minkowski space `R^n_1`.
    pub fn lorentzian(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(n, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// `epsilon_i`: `-1` on the first `nu` axes, `+1` afterwards (0-based `i`).
    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.nu {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    pub(crate) fn sign_i64(&self, i: usize) -> i64 {
        if i < self.nu {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.sign(i)).collect()
    }

    /// The Gram matrix `J`.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.signs()))
    }

    /// `x^t J y` without dimension checks; callers guarantee matching lengths.
    #[inline]
    pub(crate) fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.iter()
            .zip(y.iter())
            .enumerate()
            .map(|(i, (a, b))| self.sign(i) * a * b)
            .sum()
    }

    /// `J M`: flips the sign of the first `nu` rows.
    pub(crate) fn left_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..self.nu.min(m.nrows()) {
            out.row_mut(i).neg_mut();
        }
        out
    }

    /// `M J`: flips the sign of the first `nu` columns.
    pub(crate) fn right_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for j in 0..self.nu.min(m.ncols()) {
            out.column_mut(j).neg_mut();
        }
        out
    }
}

/// Causal character of a vector or of a matrix under `<<., .>>_J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalClass {
    Timelike,
    Spacelike,
    Null,
}

impl CausalClass {
    /// Classifies a squared norm. The zero element is spacelike.
    pub fn from_square(square: f64, is_zero: bool, tol: f64) -> Self {
        if is_zero || square > tol {
            CausalClass::Spacelike
        } else if square < -tol {
            CausalClass::Timelike
        } else {
            CausalClass::Null
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CausalClass::Timelike => "timelike",
            CausalClass::Spacelike => "spacelike",
            CausalClass::Null => "null",
        }
    }
}

/// Connected component of `O_nu(n)`, tagged by the signs of `det A_T` and
/// `det A_S` in this order (`PM`: time preserving, space reversing).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrientationComponent {
    PP,
    PM,
    MP,
    MM,
}

impl OrientationComponent {
    pub fn from_signs(time_positive: bool, space_positive: bool) -> Self {
        match (time_positive, space_positive) {
            (true, true) => Self::PP,
            (true, false) => Self::PM,
            (false, true) => Self::MP,
            (false, false) => Self::MM,
        }
    }

    pub fn time_positive(&self) -> bool {
        matches!(self, Self::PP | Self::PM)
    }

    pub fn space_positive(&self) -> bool {
        matches!(self, Self::PP | Self::MP)
    }

    /// Component of a product `A B`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_signs(
            self.time_positive() == other.time_positive(),
            self.space_positive() == other.space_positive(),
        )
    }
}

/// The subgroup `G` used for orientation conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupChoice {
    /// `O^{++}`, the identity component.
    #[default]
    IdentityComponent,
    /// `O^{++} ∪ O^{--}`
    Orientation,
    /// `O^{++} ∪ O^{+-}`
    TimeOrientation,
    /// `O^{++} ∪ O^{-+}`
    SpaceOrientation,
    /// All of `O_nu(n)`.
    Full,
}

impl GroupChoice {
    pub fn contains(&self, c: OrientationComponent) -> bool {
        use OrientationComponent::*;
        match self {
            GroupChoice::IdentityComponent => c == PP,
            GroupChoice::Orientation => matches!(c, PP | MM),
            GroupChoice::TimeOrientation => matches!(c, PP | PM),
            GroupChoice::SpaceOrientation => matches!(c, PP | MP),
            GroupChoice::Full => true,
        }
    }
}

/// An element of `O_nu(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    mat: DMatrix<f64>,
    sig: Signature,
}

impl GroupElement {
    /// Checks `X^t J X = J` to `tol` (max-norm).
    pub fn new(mat: DMatrix<f64>, sig: Signature, tol: f64) -> Result<Self> {
        check_square(&mat, sig)?;
        let residual = group_residual(&mat, sig);
        if residual > tol {
            return Err(Error::GroupConstraint { residual });
        }
        Ok(Self { mat, sig })
    }

    pub(crate) fn new_unchecked(mat: DMatrix<f64>, sig: Signature) -> Self {
        Self { mat, sig }
    }

    pub fn identity(sig: Signature) -> Self {
        Self { mat: DMatrix::identity(sig.n, sig.n), sig }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    /// `X^{-1} = X^J = J X^t J`.
    pub fn inverse(&self) -> Self {
        Self { mat: adjoint_unchecked(&self.mat, self.sig), sig: self.sig }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { mat: &self.mat * &other.mat, sig: self.sig }
    }

    pub fn act(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.mat * v
    }

    pub fn residual(&self) -> f64 {
        group_residual(&self.mat, self.sig)
    }
}

/// An element of `o_nu(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    mat: DMatrix<f64>,
    sig: Signature,
}

impl AlgebraElement {
    pub fn new(mat: DMatrix<f64>, sig: Signature, tol: f64) -> Result<Self> {
        check_square(&mat, sig)?;
        let residual = algebra_residual(&mat, sig);
        if residual > tol {
            return Err(Error::AlgebraConstraint { residual });
        }
        Ok(Self { mat, sig })
    }

    pub(crate) fn new_unchecked(mat: DMatrix<f64>, sig: Signature) -> Self {
        Self { mat, sig }
    }

    /// `(u x^t - x u^t) J / r`, the generator that rotates `x` towards `u`.
    pub fn wedge(u: &DVector<f64>, x: &DVector<f64>, sig: Signature, r: f64) -> Self {
        let m = (u * x.transpose() - x * u.transpose()) / r;
        Self { mat: sig.right_mul(&m), sig }
    }

    pub fn zero(sig: Signature) -> Self {
        Self { mat: DMatrix::zeros(sig.n, sig.n), sig }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: &self.mat * s, sig: self.sig }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: &self.mat + &other.mat, sig: self.sig }
    }

    pub fn bracket(&self, other: &Self) -> Self {
        Self { mat: &self.mat * &other.mat - &other.mat * &self.mat, sig: self.sig }
    }
}

fn check_square(m: &DMatrix<f64>, sig: Signature) -> Result<()> {
    check_dim(sig.n, m.nrows())?;
    check_dim(sig.n, m.ncols())
}

/// `x^t J y`.
pub fn j_inner(x: &DVector<f64>, y: &DVector<f64>, sig: Signature) -> Result<f64> {
    check_dim(sig.n, x.len())?;
    check_dim(sig.n, y.len())?;
    Ok(sig.dot(x, y))
}

/// Causal character of `x`; the zero vector is spacelike.
///
/// Panics if `x` does not have `sig.n()` entries.
pub fn causal_class(x: &DVector<f64>, sig: Signature, tol: f64) -> CausalClass {
    assert_eq!(x.len(), sig.n, "causal_class: dimension mismatch");
    let is_zero = x.iter().all(|v| *v == 0.0);
    CausalClass::from_square(sig.dot(x, x), is_zero, tol)
}

fn adjoint_unchecked(a: &DMatrix<f64>, sig: Signature) -> DMatrix<f64> {
    sig.right_mul(&sig.left_mul(&a.transpose()))
}

/// `A^J = J A^t J`.
pub fn j_adjoint(a: &DMatrix<f64>, sig: Signature) -> Result<DMatrix<f64>> {
    check_square(a, sig)?;
    Ok(adjoint_unchecked(a, sig))
}

/// `max |X^t J X - J|`.
pub fn group_residual(a: &DMatrix<f64>, sig: Signature) -> f64 {
    let g = a.transpose() * sig.left_mul(a);
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { sig.sign(i) } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `max |A^t J + J A|`.
pub fn algebra_residual(a: &DMatrix<f64>, sig: Signature) -> f64 {
    let m = sig.right_mul(&a.transpose()) + sig.left_mul(a);
    m.amax()
}

pub fn is_group_element(a: &DMatrix<f64>, sig: Signature, tol: f64) -> bool {
    a.nrows() == sig.n && a.ncols() == sig.n && group_residual(a, sig) <= tol
}

/// `<<A, B>>_J = tr(A^J B)`.
pub fn matrix_j_inner(a: &DMatrix<f64>, b: &DMatrix<f64>, sig: Signature) -> Result<f64> {
    check_square(a, sig)?;
    check_square(b, sig)?;
    let aj = adjoint_unchecked(a, sig);
    let mut tr = 0.0;
    for i in 0..sig.n {
        tr += aj.row(i).iter().zip(b.column(i).iter()).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(tr)
}

/// Minimum `|det|` accepted for the time and space blocks.
pub const BLOCK_DET_TOL: f64 = 1e-12;

/// Orientation component from the signs of `det A_T` (top-left `nu x nu`)
/// and `det A_S` (bottom-right). An absent block counts as `+1`.
pub fn orientation_component(a: &GroupElement) -> Result<OrientationComponent> {
    let sig = a.sig;
    let n = sig.n;
    let nu = sig.nu;
    let det_t = if nu == 0 { 1.0 } else { a.mat.view((0, 0), (nu, nu)).into_owned().determinant() };
    let det_s = if nu == n {
        1.0
    } else {
        a.mat.view((nu, nu), (n - nu, n - nu)).into_owned().determinant()
    };
    for det in [det_t, det_s] {
        if det.abs() < BLOCK_DET_TOL {
            return Err(Error::DegenerateBlock { det });
        }
    }
    Ok(OrientationComponent::from_signs(det_t > 0.0, det_s > 0.0))
}

/// Hyperbolic rotation by rapidity `t` in the `(i, j)` plane of `R^n`,
/// with `i` timelike and `j` spacelike (0-based).
pub fn boost(n: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    m[(i, i)] = t.cosh();
    m[(j, j)] = t.cosh();
    m[(i, j)] = t.sinh();
    m[(j, i)] = t.sinh();
    m
}

/// Circular rotation by angle `t` in the `(i, j)` plane of `R^n` (0-based).
pub fn rotation(n: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    m[(i, i)] = t.cos();
    m[(j, j)] = t.cos();
    m[(i, j)] = -t.sin();
    m[(j, i)] = t.sin();
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn lor3() -> Signature {
        Signature::new(3, 1).unwrap()
    }

    #[test]
    fn signature_bounds() {
        assert!(Signature::new(0, 0).is_err());
        assert!(Signature::new(3, 4).is_err());
        let s = Signature::new(4, 2).unwrap();
        let j = s.gram();
        assert_eq!(&j * &j, DMatrix::identity(4, 4));
        assert_eq!(s.signs(), vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn signature_deserialize_validates() {
        let s: Signature = serde_json::from_str(r#"{"n":3,"nu":1}"#).unwrap();
        assert_eq!(s, lor3());
        assert!(serde_json::from_str::<Signature>(r#"{"n":2,"nu":3}"#).is_err());
    }

    #[test]
    fn j_inner_examples() {
        let s = lor3();
        assert_eq!(j_inner(&dvector![0.0, 0.0, 1.0], &dvector![0.0, 0.0, 1.0], s).unwrap(), 1.0);
        assert_eq!(j_inner(&dvector![1.0, 0.0, 0.0], &dvector![1.0, 0.0, 0.0], s).unwrap(), -1.0);
        let v = dvector![2f64.sqrt(), 1.0, 0.0];
        assert!((j_inner(&v, &v, s).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(
            j_inner(&dvector![1.0, 0.0], &dvector![1.0, 0.0, 0.0], s),
            Err(Error::Dimension { expected: 3, got: 2 })
        );
    }

    #[test]
    fn causal_class_examples() {
        let s = lor3();
        let tol = DEFAULT_NULL_TOL;
        assert_eq!(causal_class(&DVector::zeros(3), s, tol), CausalClass::Spacelike);
        assert_eq!(causal_class(&dvector![1.0, 1.0, 0.0], s, tol), CausalClass::Null);
        assert_eq!(causal_class(&dvector![0.0, 1.0, 0.0], s, tol), CausalClass::Spacelike);
        assert_eq!(causal_class(&dvector![1.0, 0.0, 0.0], s, tol), CausalClass::Timelike);
    }

    #[test]
    fn adjoint_of_boost_is_reverse_boost() {
        let s = lor3();
        let r = boost(3, 0, 2, 0.7);
        let rj = j_adjoint(&r, s).unwrap();
        assert!((rj - boost(3, 0, 2, -0.7)).amax() < 1e-15);
        assert_eq!(j_adjoint(&DMatrix::identity(3, 3), s).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn group_membership_examples() {
        let s = lor3();
        assert!(is_group_element(&DMatrix::identity(3, 3), s, 1e-12));
        assert!(is_group_element(&boost(3, 0, 2, 1.0), s, 1e-12));
        let mut bad = DMatrix::identity(3, 3);
        bad[(0, 1)] = 1e-3;
        assert!(!is_group_element(&bad, s, 1e-9));
        assert!(!is_group_element(&DMatrix::identity(2, 2), s, 1e-9));
    }

    #[test]
    fn matrix_inner_examples() {
        let s = lor3();
        let mut k = DMatrix::zeros(3, 3);
        k[(0, 2)] = 1.0;
        k[(2, 0)] = 1.0;
        assert!((matrix_j_inner(&k, &k, s).unwrap() + 2.0).abs() < 1e-15);
        let mut w = DMatrix::zeros(3, 3);
        w[(1, 2)] = 1.0;
        w[(2, 1)] = -1.0;
        assert!((matrix_j_inner(&w, &w, s).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(matrix_j_inner(&DMatrix::zeros(3, 3), &DMatrix::zeros(3, 3), s).unwrap(), 0.0);
    }

    #[test]
    fn orientation_examples() {
        let s = lor3();
        let id = GroupElement::identity(s);
        assert_eq!(orientation_component(&id).unwrap(), OrientationComponent::PP);

        // Twist from the Lorentz sphere frame example: time reversing, space preserving.
        let r2 = 2f64.sqrt();
        let w = DMatrix::from_row_slice(3, 3, &[-r2, 1.0, 0.0, -1.0, r2, 0.0, 0.0, 0.0, 1.0]);
        let w = GroupElement::new(w, s, 1e-12).unwrap();
        assert_eq!(orientation_component(&w).unwrap(), OrientationComponent::MP);

        let m = GroupElement::new(DMatrix::from_diagonal(&dvector![-1.0, -1.0, 1.0]), s, 0.0).unwrap();
        assert_eq!(orientation_component(&m).unwrap(), OrientationComponent::MM);
    }

    #[test]
    fn orientation_with_absent_blocks() {
        let e = Signature::euclidean(2).unwrap();
        let refl = GroupElement::new(DMatrix::from_diagonal(&dvector![1.0, -1.0]), e, 0.0).unwrap();
        assert_eq!(orientation_component(&refl).unwrap(), OrientationComponent::PM);
        let t = Signature::new(2, 2).unwrap();
        let refl = GroupElement::new(DMatrix::from_diagonal(&dvector![1.0, -1.0]), t, 0.0).unwrap();
        assert_eq!(orientation_component(&refl).unwrap(), OrientationComponent::MP);
    }

    #[test]
    fn degenerate_block_is_reported() {
        let s = lor3();
        let g = GroupElement::new_unchecked(DMatrix::zeros(3, 3), s);
        assert!(matches!(orientation_component(&g), Err(Error::DegenerateBlock { .. })));
    }

    #[test]
    fn group_choice_membership() {
        use OrientationComponent::*;
        assert!(GroupChoice::IdentityComponent.contains(PP));
        assert!(!GroupChoice::IdentityComponent.contains(MM));
        assert!(GroupChoice::Orientation.contains(MM));
        assert!(GroupChoice::TimeOrientation.contains(PM));
        assert!(!GroupChoice::TimeOrientation.contains(MP));
        assert!(GroupChoice::SpaceOrientation.contains(MP));
        assert!(GroupChoice::Full.contains(PM));
    }

    #[test]
    fn wedge_is_in_algebra() {
        let s = Signature::new(4, 2).unwrap();
        let w = AlgebraElement::wedge(&dvector![1.0, 2.0, -0.5, 3.0], &dvector![0.3, 0.0, 1.0, -1.0], s, 2.5);
        assert!(algebra_residual(w.matrix(), s) < 1e-15);
    }
}
