//! Hyperquadrics `{<x, x>_J = r}` and their affine tangent planes, curves on
//! them, covariant and normal derivatives, geodesics and parallel transport.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diff::{self, differentiate, validate_grid};
use crate::error::{check_dim, Error, Result};
use crate::indefinite::{causal_class, expm, AlgebraElement, CausalClass, Signature, DEFAULT_NULL_TOL};

/// Relative tolerance for the membership and orthogonality preconditions.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

fn scaled(tol: f64, x: &DVector<f64>) -> f64 {
    tol * x.norm_squared().max(1.0)
}

/// A rolling partner: a pseudo-Riemannian submanifold of `R^n_nu` described
/// by its normal spaces.
pub trait Geometry: Sync {
    fn signature(&self) -> Signature;

    /// Number of normal directions.
    fn codim(&self) -> usize {
        1
    }

    /// Intrinsic dimension `m`.
    fn dim(&self) -> usize {
        self.signature().n() - self.codim()
    }

    /// Defining-equation residual; zero on the manifold.
    fn membership_residual(&self, x: &DVector<f64>) -> f64;

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.signature().n() && self.membership_residual(x).abs() <= tol
    }

    /// Mutually `J`-orthogonal, non-null normals at `x` paired with their
    /// squares `<nu, nu>_J`. Must also make sense slightly off the manifold.
    fn normal_basis(&self, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)>;

    /// Tangent projector `P(x) = I - sum nu nu^t J / <nu, nu>` without
    /// membership checks.
    fn projector(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let sig = self.signature();
        let n = sig.n();
        let mut p = DMatrix::identity(n, n);
        for (nrm, sq) in self.normal_basis(x) {
            p -= sig.right_mul(&(&nrm * nrm.transpose())) / sq;
        }
        p
    }

    fn tangent_project(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let sig = self.signature();
        check_dim(sig.n(), x.len())?;
        check_dim(sig.n(), v.len())?;
        let residual = self.membership_residual(x);
        if residual.abs() > scaled(MEMBERSHIP_TOL, x) {
            return Err(Error::Membership { residual });
        }
        let mut out = v.clone();
        for (nrm, sq) in self.normal_basis(x) {
            out -= &nrm * (sig.dot(v, &nrm) / sq);
        }
        Ok(out)
    }

    fn normal_project(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(v - self.tangent_project(x, v)?)
    }

    /// Generator `M` in `o_nu(n)` such that `dT/dt = M T` carries tangent
    /// and normal vectors parallel along a curve with position `x` and
    /// velocity `xdot`.
    ///
    /// The default is `[dP, P]` with `dP` the derivative of the projector
    /// along `xdot`, by central differences.
    fn transport_generator(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> DMatrix<f64> {
        let n = self.signature().n();
        let speed = xdot.norm();
        if speed == 0.0 {
            return DMatrix::zeros(n, n);
        }
        let h = f64::EPSILON.cbrt() * x.norm().max(1.0) / speed;
        let dp = (self.projector(&(x + xdot * h)) - self.projector(&(x - xdot * h))) / (2.0 * h);
        let p = self.projector(x);
        &dp * &p - &p * &dp
    }

    /// A spanning set of `T_x`, obtained by projecting the standard basis.
    fn tangent_spanning_set(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let n = self.signature().n();
        (0..n)
            .map(|k| {
                let e = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
                self.tangent_project(x, &e)
            })
            .collect()
    }
}

/// `S^m_nu(r) = { x in R^{m+1}_nu : <x, x>_J = r }`, `r != 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperquadric {
    sig: Signature,
    level: f64,
}

impl Hyperquadric {
    pub fn new(sig: Signature, level: f64) -> Result<Self> {
        if level == 0.0 || !level.is_finite() {
            return Err(Error::Signature(format!("hyperquadric level must be finite and non-zero, got {level}")));
        }
        if sig.n() < 2 {
            return Err(Error::Signature("hyperquadric needs ambient dimension at least 2".into()));
        }
        Ok(Self { sig, level })
    }

    /// The Lorentz sphere `S^m_1 = { <x, x>_J = 1 } subset R^{m+1}_1`.
    pub fn lorentz_sphere(m: usize) -> Result<Self> {
        Self::new(Signature::new(m + 1, 1)?, 1.0)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    fn check_base(&self, x0: &DVector<f64>) -> Result<()> {
        check_dim(self.sig.n(), x0.len())?;
        let residual = self.membership_residual(x0);
        if residual.abs() > scaled(MEMBERSHIP_TOL, x0) {
            return Err(Error::Membership { residual });
        }
        Ok(())
    }

    /// Geodesic `exp(t A) x0` with initial velocity `u`.
    ///
    /// `u` must be `J`-orthogonal to `x0` and have `<u, u>_J` in
    /// `{-1, 0, 1}`. For `r = 1` the closed forms `x0 cos t + u sin t`,
    /// `x0 cosh t + u sinh t` and `x0 + t u` are used; otherwise the
    /// exponential of `A = (u x0^t - x0 u^t) J / r` is evaluated.
    pub fn geodesic(&self, x0: &DVector<f64>, u: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let class = self.check_geodesic_data(x0, u)?;
        if self.level == 1.0 {
            return Ok(match class {
                CausalClass::Spacelike => x0 * t.cos() + u * t.sin(),
                CausalClass::Timelike => x0 * t.cosh() + u * t.sinh(),
                CausalClass::Null => x0 + u * t,
            });
        }
        let a = AlgebraElement::wedge(u, x0, self.sig, self.level);
        Ok(expm(&(a.matrix() * t)) * x0)
    }

    fn check_geodesic_data(&self, x0: &DVector<f64>, u: &DVector<f64>) -> Result<CausalClass> {
        self.check_base(x0)?;
        check_dim(self.sig.n(), u.len())?;
        let residual = self.sig.dot(u, x0);
        if residual.abs() > 1e-9 * (x0.norm() * u.norm()).max(1.0) {
            return Err(Error::Orthogonality { residual });
        }
        let norm = self.sig.dot(u, u);
        if u.iter().all(|v| *v == 0.0) {
            return Err(Error::Normalization { norm });
        }
        let class = causal_class(u, self.sig, DEFAULT_NULL_TOL);
        if class != CausalClass::Null && (norm.abs() - 1.0).abs() > 1e-9 {
            return Err(Error::Normalization { norm });
        }
        Ok(class)
    }
}

impl Geometry for Hyperquadric {
    fn signature(&self) -> Signature {
        self.sig
    }

    fn membership_residual(&self, x: &DVector<f64>) -> f64 {
        self.sig.dot(x, x) - self.level
    }

    fn normal_basis(&self, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
        vec![(x.clone(), self.level)]
    }

    /// `(x' x^t - x x'^t) J / r`
    fn transport_generator(&self, x: &DVector<f64>, xdot: &DVector<f64>) -> DMatrix<f64> {
        AlgebraElement::wedge(xdot, x, self.sig, self.level).matrix().clone()
    }
}

/// The affine tangent plane `x0 + T_{x0} M` of a submanifold through `x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTangentSpace {
    sig: Signature,
    base: DVector<f64>,
    normals: Vec<(DVector<f64>, f64)>,
}

impl AffineTangentSpace {
    pub fn new(hq: &Hyperquadric, x0: &DVector<f64>) -> Result<Self> {
        hq.check_base(x0)?;
        Ok(Self { sig: hq.sig, base: x0.clone(), normals: hq.normal_basis(x0) })
    }

    /// Affine tangent plane of any geometry at one of its points.
    pub fn of(geom: &dyn Geometry, x0: &DVector<f64>) -> Result<Self> {
        let sig = geom.signature();
        check_dim(sig.n(), x0.len())?;
        let residual = geom.membership_residual(x0);
        if residual.abs() > scaled(MEMBERSHIP_TOL, x0) {
            return Err(Error::Membership { residual });
        }
        Ok(Self { sig, base: x0.clone(), normals: geom.normal_basis(x0) })
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn geodesic(&self, x0: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        x0 + u * t
    }
}

impl Geometry for AffineTangentSpace {
    fn signature(&self) -> Signature {
        self.sig
    }

    fn codim(&self) -> usize {
        self.normals.len()
    }

    fn membership_residual(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.base;
        self.normals
            .iter()
            .map(|(nrm, sq)| self.sig.dot(&d, nrm) / sq.abs().sqrt())
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0)
    }

    fn normal_basis(&self, _x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
        self.normals.clone()
    }

    fn transport_generator(&self, _x: &DVector<f64>, _xdot: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.sig.n(), self.sig.n())
    }
}

/// A hyperquadric of `R^n_nu` placed in the slice `{x_{n+1} = 0}` of
/// `R^{n+1}_nu`: a codimension-2 submanifold with normals `(x, 0)` and
/// `e_{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperquadricSlice {
    hq: Hyperquadric,
    sig: Signature,
}

impl HyperquadricSlice {
    pub fn new(hq: Hyperquadric) -> Result<Self> {
        let inner = hq.signature();
        Ok(Self { hq, sig: Signature::new(inner.n() + 1, inner.nu())? })
    }

    pub fn hyperquadric(&self) -> &Hyperquadric {
        &self.hq
    }

    /// Embeds a point of the hyperquadric.
    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        DVector::from_fn(n + 1, |i, _| if i < n { x[i] } else { 0.0 })
    }
}

impl Geometry for HyperquadricSlice {
    fn signature(&self) -> Signature {
        self.sig
    }

    fn codim(&self) -> usize {
        2
    }

    fn membership_residual(&self, x: &DVector<f64>) -> f64 {
        let n = self.sig.n() - 1;
        let inner = x.rows(0, n).into_owned();
        let a = self.hq.membership_residual(&inner);
        let b = x[n];
        if a.abs() >= b.abs() {
            a
        } else {
            b
        }
    }

    fn normal_basis(&self, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
        let n = self.sig.n();
        let mut radial = x.clone();
        radial[n - 1] = 0.0;
        let sq = self.sig.dot(&radial, &radial);
        let axis = DVector::from_fn(n, |i, _| if i == n - 1 { 1.0 } else { 0.0 });
        vec![(radial, sq), (axis, 1.0)]
    }
}

/// A curve sampled on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSamples {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

impl CurveSamples {
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        validate_grid(&times, 1)?;
        check_dim(times.len(), points.len())?;
        if let Some(first) = points.first() {
            for p in &points {
                check_dim(first.len(), p.len())?;
            }
        }
        Ok(Self { times, points })
    }

    /// Samples `f` on `times`.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let points = times.iter().map(|t| f(*t)).collect();
        Self::new(times, points)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    pub fn velocities(&self) -> Result<Vec<DVector<f64>>> {
        differentiate(&self.times, &self.points)
    }

    /// Max `|membership residual|` over all samples.
    pub fn membership_residual(&self, geom: &dyn Geometry) -> f64 {
        self.points.iter().map(|p| geom.membership_residual(p).abs()).fold(0.0, f64::max)
    }
}

/// `D Z / dt`: the tangent part of the finite-difference derivative.
pub fn covariant_derivative(geom: &dyn Geometry, curve: &CurveSamples, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let dz = differentiate(&curve.times, field)?;
    curve.points.iter().zip(&dz).map(|(x, d)| geom.tangent_project(x, d)).collect()
}

/// `D^perp Psi / dt`: the normal part of the finite-difference derivative.
pub fn normal_derivative(geom: &dyn Geometry, curve: &CurveSamples, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let dz = differentiate(&curve.times, field)?;
    curve.points.iter().zip(&dz).map(|(x, d)| geom.normal_project(x, d)).collect()
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3) / 6

/// Propagators `T(t_k)` with `T(t_0) = I` and `dT/dt = M(t) T` along a sampled
/// curve, where `M` is the geometry's transport generator.
///
/// Each step applies a fourth-order Magnus exponential with the generator
/// evaluated at the two Gauss points of the interval; positions and
/// velocities there come from the local cubic interpolant of the samples.
pub fn transport_propagators(geom: &dyn Geometry, curve: &CurveSamples) -> Result<Vec<DMatrix<f64>>> {
    let n = geom.signature().n();
    check_dim(n, curve.ambient_dim())?;
    let times = &curve.times;
    let mut out = Vec::with_capacity(times.len());
    let mut t_acc = DMatrix::identity(n, n);
    out.push(t_acc.clone());
    if times.len() < 2 {
        return Ok(out);
    }
    let generator_at = |t: f64| {
        let (x, xdot) = diff::interpolate(times, &curve.points, t);
        geom.transport_generator(&x, &xdot)
    };
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let mid = 0.5 * (w[0] + w[1]);
        let m1 = generator_at(mid - GAUSS_OFFSET * h);
        let m2 = generator_at(mid + GAUSS_OFFSET * h);
        let comm = &m2 * &m1 - &m1 * &m2;
        let omega = (&m1 + &m2) * (0.5 * h) + comm * (3f64.sqrt() * h * h / 12.0);
        t_acc = expm(&omega) * t_acc;
        out.push(t_acc.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use std::f64::consts::PI;

    fn s12() -> Hyperquadric {
        Hyperquadric::lorentz_sphere(2).unwrap()
    }

    fn grid(t_end: f64, h: f64) -> Vec<f64> {
        diff::uniform_grid(0.0, t_end, h).unwrap()
    }

    #[test]
    fn contains_examples() {
        let hq = s12();
        assert!(hq.contains(&dvector![0.0, 0.0, 1.0], 1e-12));
        assert!(hq.contains(&dvector![1f64.sinh(), 0.0, 1f64.cosh()], 1e-12));
        assert!(!hq.contains(&dvector![0.0, 0.0, 2.0], 1e-9));
        assert!(Hyperquadric::new(Signature::new(3, 1).unwrap(), 0.0).is_err());
    }

    #[test]
    fn tangent_project_examples() {
        let hq = s12();
        let x0 = dvector![0.0, 0.0, 1.0];
        let v = dvector![1.0, 2.0, 0.0];
        assert_eq!(hq.tangent_project(&x0, &v).unwrap(), v);
        assert!(hq.tangent_project(&x0, &x0).unwrap().amax() < 1e-15);
        let x = dvector![1f64.sinh(), 0.0, 1f64.cosh()];
        let e = dvector![1.0, 0.0, 0.0];
        let expected = &e + &x * 1f64.sinh();
        assert!((hq.tangent_project(&x, &e).unwrap() - expected).amax() < 1e-15);
        assert!(matches!(hq.tangent_project(&dvector![0.0, 0.0, 2.0], &e), Err(Error::Membership { .. })));
    }

    #[test]
    fn geodesic_examples() {
        let hq = s12();
        let x0 = dvector![0.0, 0.0, 1.0];
        let g = hq.geodesic(&x0, &dvector![1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((g - dvector![1f64.sinh(), 0.0, 1f64.cosh()]).amax() < 1e-15);
        let g = hq.geodesic(&x0, &dvector![0.0, 1.0, 0.0], PI).unwrap();
        assert!((g + &x0).amax() < 1e-15);
        let g = hq.geodesic(&x0, &dvector![1.0, 1.0, 0.0], 2.0).unwrap();
        assert_eq!(g, dvector![2.0, 2.0, 1.0]);
    }

    #[test]
    fn geodesic_errors() {
        let hq = s12();
        let x0 = dvector![0.0, 0.0, 1.0];
        assert!(matches!(hq.geodesic(&x0, &dvector![0.0, 1.0, 0.5], 1.0), Err(Error::Orthogonality { .. })));
        assert!(matches!(hq.geodesic(&x0, &dvector![0.0, 2.0, 0.0], 1.0), Err(Error::Normalization { .. })));
        assert!(matches!(hq.geodesic(&dvector![0.0, 0.0, 2.0], &dvector![0.0, 1.0, 0.0], 1.0), Err(Error::Membership { .. })));
    }

    #[test]
    fn geodesic_for_other_levels_stays_on_quadric() {
        let hq = Hyperquadric::new(Signature::new(3, 1).unwrap(), -4.0).unwrap();
        let x0 = dvector![2.0, 0.0, 0.0];
        let u = dvector![0.0, 1.0, 0.0];
        for t in [0.5, 1.0, 3.0] {
            let x = hq.geodesic(&x0, &u, t).unwrap();
            assert!(hq.membership_residual(&x).abs() < 1e-12);
            // Speed along a spacelike geodesic of the pseudo-hyperbolic plane is 1.
            let h = 1e-5;
            let v = (hq.geodesic(&x0, &u, t + h).unwrap() - hq.geodesic(&x0, &u, t - h).unwrap()) / (2.0 * h);
            assert!((hq.signature().dot(&v, &v) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_plane_membership() {
        let hq = s12();
        let x0 = dvector![0.0, 0.0, 1.0];
        let plane = AffineTangentSpace::new(&hq, &x0).unwrap();
        assert!(plane.contains(&dvector![3.0, -1.0, 1.0], 1e-12));
        assert!(!plane.contains(&dvector![0.0, 0.0, 1.5], 1e-9));
        let v = dvector![1.0, 2.0, 3.0];
        assert_eq!(plane.tangent_project(&x0, &v).unwrap(), dvector![1.0, 2.0, 0.0]);
    }

    #[test]
    fn covariant_derivative_examples() {
        let hq = s12();
        let times = grid(1.0, 1e-2);
        let curve = CurveSamples::from_fn(times.clone(), |t| dvector![t.sinh(), 0.0, t.cosh()]).unwrap();
        let e1: Vec<_> = times.iter().map(|t| dvector![t.cosh(), 0.0, t.sinh()]).collect();
        for d in covariant_derivative(&hq, &curve, &e1).unwrap() {
            assert!(d.amax() < 1e-4);
        }
        let te2: Vec<_> = times.iter().map(|t| dvector![0.0, *t, 0.0]).collect();
        for d in covariant_derivative(&hq, &curve, &te2).unwrap() {
            assert!((d - dvector![0.0, 1.0, 0.0]).amax() < 1e-10);
        }
        let short = CurveSamples::new(vec![0.0, 1.0], vec![dvector![0.0, 0.0, 1.0]; 2]).unwrap();
        assert!(matches!(covariant_derivative(&hq, &short, &short.points), Err(Error::Grid(_))));
    }

    #[test]
    fn normal_derivative_examples() {
        let hq = s12();
        let times = grid(1.0, 1e-2);
        let curve = CurveSamples::from_fn(times.clone(), |t| dvector![t.sinh(), 0.3 * t, t.cosh()] / (1.0 + 0.09 * t * t).sqrt()).unwrap();
        for d in normal_derivative(&hq, &curve, &curve.points).unwrap() {
            assert!(d.amax() < 1e-4);
        }
        let scaled: Vec<_> = curve.points.iter().zip(&times).map(|(x, t)| x * *t).collect();
        for (d, x) in normal_derivative(&hq, &curve, &scaled).unwrap().iter().zip(&curve.points) {
            assert!((d - x).amax() < 5e-4);
        }
    }

    #[test]
    fn propagators_transport_boost_frame() {
        let hq = s12();
        let times = grid(2.0, 1e-2);
        let curve = CurveSamples::from_fn(times.clone(), |t| dvector![t.sinh(), 0.0, t.cosh()]).unwrap();
        let props = transport_propagators(&hq, &curve).unwrap();
        for (t, p) in times.iter().zip(&props) {
            let e1 = p * dvector![1.0, 0.0, 0.0];
            assert!((e1 - dvector![t.cosh(), 0.0, t.sinh()]).amax() < 1e-8);
            let e2 = p * dvector![0.0, 1.0, 0.0];
            assert!((e2 - dvector![0.0, 1.0, 0.0]).amax() < 1e-12);
            let x = p * dvector![0.0, 0.0, 1.0];
            assert!((x - dvector![t.sinh(), 0.0, t.cosh()]).amax() < 1e-8);
        }
    }

    #[test]
    fn default_generator_matches_closed_form() {
        struct Generic(Hyperquadric);
        impl Geometry for Generic {
            fn signature(&self) -> Signature {
                self.0.signature()
            }
            fn membership_residual(&self, x: &DVector<f64>) -> f64 {
                self.0.membership_residual(x)
            }
            fn normal_basis(&self, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
                self.0.normal_basis(x)
            }
        }
        let hq = s12();
        let x = dvector![0.3f64.sinh(), 0.0, 0.3f64.cosh()];
        let xdot = dvector![0.3f64.cosh(), 0.7, 0.3f64.sinh()];
        let exact = hq.transport_generator(&x, &xdot);
        let fd = Generic(hq).transport_generator(&x, &xdot);
        assert!((exact - fd).amax() < 1e-8);
    }

    #[test]
    fn slice_has_two_normals() {
        let slice = HyperquadricSlice::new(s12()).unwrap();
        assert_eq!(slice.dim(), 2);
        let x = slice.lift(&dvector![0.0, 0.6f64.sin(), 0.6f64.cos()]);
        assert!(slice.contains(&x, 1e-12));
        assert!(!slice.contains(&dvector![0.0, 0.0, 1.0, 0.1], 1e-12));
        let v = dvector![1.0, 2.0, 3.0, 4.0];
        let t = slice.tangent_project(&x, &v).unwrap();
        let sig = slice.signature();
        for (nrm, _) in slice.normal_basis(&x) {
            assert!(sig.dot(&t, &nrm).abs() < 1e-14);
        }
        let plane = AffineTangentSpace::of(&slice, &x).unwrap();
        assert_eq!(plane.codim(), 2);
        assert!(plane.contains(&(&x + &t), 1e-12));
    }
}
