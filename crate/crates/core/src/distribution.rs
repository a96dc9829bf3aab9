//! Chart-level description of rolling as a horizontal curve: Christoffel
//! symbols, frame connection forms, the non-twisted lifts of tangent vectors
//! and the causal character of the configuration-matrix curves.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::diff::{differentiate, validate_grid};
use crate::error::{check_dim, Error, Result};
use crate::hyperquadric::{Geometry, HyperquadricSlice};
use crate::indefinite::{group_residual, matrix_j_inner, orthonormalize_in_order, CausalClass, Signature};
use crate::kinematics::{curves, RollingTrajectory};

/// Relative `|det g|` below which a metric counts as degenerate.
pub const METRIC_DET_TOL: f64 = 1e-12;
/// Group-constraint tolerance for trivialized curves.
pub const TRIVIALIZED_GROUP_TOL: f64 = 1e-6;
/// Band around zero inside which a causal-trace value counts as null.
pub const CAUSAL_TRACE_TOL: f64 = 1e-8;

type PointFn<T> = Arc<dyn Fn(&DVector<f64>) -> T + Send + Sync>;

fn fd_step(x: &DVector<f64>) -> f64 {
    f64::EPSILON.cbrt() * x.amax().max(1.0)
}

fn unit(m: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 })
}

fn diag(signs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(signs))
}

/// `Gamma^i_{kh}` stored densely, upper index first.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(m: usize) -> Self {
        Self { m, data: vec![0.0; m * m * m] }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, k: usize, h: usize) -> f64 {
        self.data[(i * self.m + k) * self.m + h]
    }

    pub fn set(&mut self, i: usize, k: usize, h: usize, v: f64) {
        self.data[(i * self.m + k) * self.m + h] = v;
    }

    /// The matrix `Gamma(v)^i_h = sum_k Gamma^i_{kh} v^k`.
    pub fn contract(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, h| (0..self.m).map(|k| self.get(i, k, h) * v[k]).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// A coordinate chart with a pseudo-Riemannian metric of constant index.
#[derive(Clone)]
pub struct MetricChart {
    dim: usize,
    index: usize,
    metric: PointFn<DMatrix<f64>>,
    christoffel: Option<PointFn<Christoffel>>,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("dim", &self.dim)
            .field("index", &self.index)
            .field("analytic_christoffel", &self.christoffel.is_some())
            .finish()
    }
}

impl MetricChart {
    pub fn new(dim: usize, index: usize, metric: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Result<Self> {
        if dim == 0 || index > dim {
            return Err(Error::Signature(format!("chart index {index} does not fit dimension {dim}")));
        }
        Ok(Self { dim, index, metric: Arc::new(metric), christoffel: None })
    }

    /// Constant metric; its Christoffel symbols vanish.
    pub fn constant(g: DMatrix<f64>) -> Result<Self> {
        let m = g.nrows();
        let index = g.clone().symmetric_eigenvalues().iter().filter(|l| **l < 0.0).count();
        Ok(Self::new(m, index, move |_| g.clone())?.with_christoffel(move |_| Christoffel::zeros(m)))
    }

    pub fn with_christoffel(mut self, f: impl Fn(&DVector<f64>) -> Christoffel + Send + Sync + 'static) -> Self {
        self.christoffel = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Metric at `x`, rejecting nearly singular values.
    pub fn metric_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x.len())?;
        let g = (self.metric)(x);
        check_dim(self.dim, g.nrows())?;
        check_dim(self.dim, g.ncols())?;
        let det = g.determinant();
        let scale: f64 = g.row_iter().map(|r| r.amax().max(f64::MIN_POSITIVE)).product();
        if !(det.abs() > METRIC_DET_TOL * scale) {
            return Err(Error::MetricDegeneracy { det });
        }
        Ok(g)
    }

    /// Orthonormal frame at `x` as columns of coordinate components: the
    /// coordinate basis orthonormalized in order, then timelike vectors first.
    pub fn frame(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let g = self.metric_at(x)?;
        let basis: Vec<DVector<f64>> = (0..self.dim).map(|k| unit(self.dim, k)).collect();
        let f = orthonormalize_in_order(&basis, |a, b| (a.transpose() * &g * b)[(0, 0)], 1e-12)?;
        if f.timelike_count() != self.index {
            return Err(Error::Signature(format!("metric has index {} where {} was declared", f.timelike_count(), self.index)));
        }
        let mut idx: Vec<usize> = (0..self.dim).collect();
        idx.sort_by_key(|&k| f.signs[k] > 0.0);
        let cols: Vec<DVector<f64>> = idx.iter().map(|&k| f.vectors[k].clone()).collect();
        Ok((DMatrix::from_columns(&cols), idx.iter().map(|&k| f.signs[k]).collect()))
    }

    pub fn signature(&self) -> Result<Signature> {
        Signature::new(self.dim, self.index)
    }
}

/// Christoffel symbols of the Levi-Civita connection at `x`, from the
/// analytic closure when the chart has one.
pub fn christoffel(chart: &MetricChart, x: &DVector<f64>) -> Result<Christoffel> {
    match &chart.christoffel {
        Some(f) => {
            chart.metric_at(x)?;
            Ok(f(x))
        }
        None => christoffel_fd(chart, x),
    }
}

/// Christoffel symbols by central differences of the metric.
pub fn christoffel_fd(chart: &MetricChart, x: &DVector<f64>) -> Result<Christoffel> {
    christoffel_fd_with_step(chart, x, fd_step(x))
}

/// As [`christoffel_fd`] with an explicit step.
pub fn christoffel_fd_with_step(chart: &MetricChart, x: &DVector<f64>, h: f64) -> Result<Christoffel> {
    let m = chart.dim;
    let g = chart.metric_at(x)?;
    let ginv = g.clone().try_inverse().ok_or(Error::MetricDegeneracy { det: g.determinant() })?;
    let dg: Vec<DMatrix<f64>> = (0..m)
        .map(|l| {
            let e = unit(m, l) * h;
            ((chart.metric)(&(x + &e)) - (chart.metric)(&(x - &e))) / (2.0 * h)
        })
        .collect();
    let mut out = Christoffel::zeros(m);
    for i in 0..m {
        for k in 0..m {
            for hh in k..m {
                let v: f64 = (0..m).map(|l| ginv[(i, l)] * (dg[k][(l, hh)] + dg[hh][(l, k)] - dg[l][(k, hh)])).sum::<f64>() * 0.5;
                out.set(i, k, hh, v);
                out.set(i, hh, k, v);
            }
        }
    }
    Ok(out)
}

/// Connection form of the chart frame: `omega(v)_ij = <nabla_v e_j, e_i>`.
pub fn connection_form(chart: &MetricChart, x: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim(chart.dim, v.len())?;
    let g = chart.metric_at(x)?;
    let (e, _) = chart.frame(x)?;
    let gamma = christoffel(chart, x)?.contract(v);
    let speed = v.amax();
    let de = if speed == 0.0 {
        DMatrix::zeros(chart.dim, chart.dim)
    } else {
        let h = fd_step(x) / speed;
        (chart.frame(&(x + v * h))?.0 - chart.frame(&(x - v * h))?.0) / (2.0 * h)
    };
    Ok(e.transpose() * g * (de + gamma * &e))
}

/// Frame connection coefficients `Gamma^i_{kh} = <nabla_{e_k} e_h, e_i>`.
pub fn frame_christoffel(chart: &MetricChart, x: &DVector<f64>) -> Result<Christoffel> {
    let m = chart.dim;
    let (e, _) = chart.frame(x)?;
    let mut out = Christoffel::zeros(m);
    for k in 0..m {
        let w = connection_form(chart, x, &e.column(k).into_owned())?;
        for i in 0..m {
            for h in 0..m {
                out.set(i, k, h, w[(i, h)]);
            }
        }
    }
    Ok(out)
}

/// A chart of a submanifold of `R^n_nu` together with a normal frame field.
#[derive(Clone)]
pub struct EmbeddedChart {
    sig: Signature,
    metric: MetricChart,
    map: PointFn<DVector<f64>>,
    jacobian: PointFn<DMatrix<f64>>,
    inverse: PointFn<DVector<f64>>,
    normals: PointFn<Vec<DVector<f64>>>,
}

impl fmt::Debug for EmbeddedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddedChart").field("signature", &self.sig).field("metric", &self.metric).finish()
    }
}

impl EmbeddedChart {
    /// `map` and `jacobian` describe the parametrization, `inverse` recovers
    /// coordinates of points on the image and `normals` is an orthonormal
    /// normal frame, timelike first.
    pub fn new(
        sig: Signature,
        dim: usize,
        index: usize,
        map: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        inverse: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        normals: impl Fn(&DVector<f64>) -> Vec<DVector<f64>> + Send + Sync + 'static,
    ) -> Result<Self> {
        let jacobian: PointFn<DMatrix<f64>> = Arc::new(jacobian);
        let jac = jacobian.clone();
        let metric = MetricChart::new(dim, index, move |x| {
            let d = jac(x);
            d.transpose() * sig.left_mul(&d)
        })?;
        Ok(Self { sig, metric, map: Arc::new(map), jacobian, inverse: Arc::new(inverse), normals: Arc::new(normals) })
    }

    pub fn with_christoffel(mut self, f: impl Fn(&DVector<f64>) -> Christoffel + Send + Sync + 'static) -> Self {
        self.metric = self.metric.with_christoffel(f);
        self
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn metric_chart(&self) -> &MetricChart {
        &self.metric
    }

    pub fn codim(&self) -> usize {
        self.sig.n() - self.metric.dim
    }

    pub fn point(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.map)(x)
    }

    pub fn coords(&self, p: &DVector<f64>) -> DVector<f64> {
        (self.inverse)(p)
    }

    /// Tangent frame in the ambient space, with its signs.
    pub fn tangent_frame(&self, x: &DVector<f64>) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        let (e, signs) = self.metric.frame(x)?;
        let d = (self.jacobian)(x);
        check_dim(self.sig.n(), d.nrows())?;
        Ok(((0..e.ncols()).map(|j| &d * e.column(j)).collect(), signs))
    }

    /// Normal frame with its signs; fails with `Frame` unless orthonormal,
    /// timelike first and normal to the chart.
    pub fn normal_frame(&self, x: &DVector<f64>) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        let nrm = (self.normals)(x);
        if nrm.len() != self.codim() {
            return Err(Error::Frame(format!("expected {} normals, got {}", self.codim(), nrm.len())));
        }
        let d = (self.jacobian)(x);
        let signs: Vec<f64> = nrm.iter().map(|v| if self.sig.dot(v, v) < 0.0 { -1.0 } else { 1.0 }).collect();
        if signs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Frame("normal frame must list timelike vectors first".into()));
        }
        for (a, va) in nrm.iter().enumerate() {
            check_dim(self.sig.n(), va.len())?;
            for (b, vb) in nrm.iter().enumerate() {
                let target = if a == b { signs[a] } else { 0.0 };
                if (self.sig.dot(va, vb) - target).abs() > 1e-9 {
                    return Err(Error::Frame("normal frame is not orthonormal".into()));
                }
            }
            for k in 0..d.ncols() {
                if self.sig.dot(va, &d.column(k).into_owned()).abs() > 1e-9 * d.column(k).amax().max(1.0) {
                    return Err(Error::Frame("normal frame is not normal to the chart".into()));
                }
            }
        }
        Ok((nrm, signs))
    }

    /// Normal connection form `omega_perp(v)_{kl} = <nabla_perp_v eps_l, eps_k>`.
    pub fn normal_connection(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.metric.dim, v.len())?;
        let (nrm, _) = self.normal_frame(x)?;
        let c = nrm.len();
        let speed = v.amax();
        if speed == 0.0 {
            return Ok(DMatrix::zeros(c, c));
        }
        let h = fd_step(x) / speed;
        let plus = (self.normals)(&(x + v * h));
        let minus = (self.normals)(&(x - v * h));
        Ok(DMatrix::from_fn(c, c, |k, l| self.sig.dot(&((&plus[l] - &minus[l]) / (2.0 * h)), &nrm[k])))
    }

    /// Chart `(a, b) -> (sinh a, cosh a sin b, cosh a cos b)` of the
    /// Lorentzian sphere `S^2_1`, with normal `x` and analytic Christoffels.
    pub fn lorentz_sphere() -> Self {
        let sig = Signature::lorentzian(3).expect("valid");
        Self::new(
            sig,
            2,
            1,
            |x| crate::reachability::lorentz_sphere_point(x[0], x[1]),
            |x| {
                let (a, b) = (x[0], x[1]);
                DMatrix::from_row_slice(3, 2, &[a.cosh(), 0.0, a.sinh() * b.sin(), a.cosh() * b.cos(), a.sinh() * b.cos(), -a.cosh() * b.sin()])
            },
            |p| DVector::from_vec(vec![p[0].asinh(), p[1].atan2(p[2])]),
            |x| vec![crate::reachability::lorentz_sphere_point(x[0], x[1])],
        )
        .expect("valid chart")
        .with_christoffel(lorentz_sphere_christoffel)
    }

    /// Affine chart `y -> base + sum y_k f_k` of a flat submanifold with a
    /// constant orthonormal tangent basis `f` and constant normals.
    pub fn affine(sig: Signature, base: DVector<f64>, basis: Vec<DVector<f64>>, normals: Vec<DVector<f64>>) -> Result<Self> {
        let m = basis.len();
        let n = sig.n();
        check_dim(n, base.len())?;
        let signs: Vec<f64> = basis.iter().map(|f| if sig.dot(f, f) < 0.0 { -1.0 } else { 1.0 }).collect();
        for (i, a) in basis.iter().enumerate() {
            check_dim(n, a.len())?;
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { signs[i] } else { 0.0 };
                if (sig.dot(a, b) - target).abs() > 1e-9 {
                    return Err(Error::Frame("affine chart basis is not orthonormal".into()));
                }
            }
        }
        let index = signs.iter().filter(|s| **s < 0.0).count();
        let d = DMatrix::from_columns(&basis);
        let (b1, b2, d1, d2) = (base.clone(), base, d.clone(), d);
        let proj = basis.clone();
        let chart = Self::new(
            sig,
            m,
            index,
            move |y| &b1 + &d1 * y,
            move |_| d2.clone(),
            move |p| {
                let rel = p - &b2;
                DVector::from_iterator(m, proj.iter().zip(&signs).map(|(f, s)| s * sig.dot(f, &rel)))
            },
            move |_| normals.clone(),
        )?;
        Ok(chart.with_christoffel(move |_| Christoffel::zeros(m)))
    }

    /// Affine chart of the tangent plane of `geom` at `x0`: the tangent basis
    /// is the orthonormalized projection of the standard basis and the
    /// normals are those of `geom`, normalized.
    pub fn affine_tangent(geom: &dyn Geometry, x0: &DVector<f64>) -> Result<Self> {
        let sig = geom.signature();
        let span = geom.tangent_spanning_set(x0)?;
        let frame = crate::indefinite::indefinite_orthonormalize(&span, sig, 1e-10)?;
        if frame.len() != geom.dim() {
            return Err(Error::DegenerateSubspace);
        }
        let mut normals: Vec<(DVector<f64>, f64)> = geom.normal_basis(x0);
        normals.sort_by_key(|(_, sq)| *sq > 0.0);
        let normals = normals.into_iter().map(|(v, sq)| v / sq.abs().sqrt()).collect();
        Self::affine(sig, x0.clone(), frame.vectors, normals)
    }

    /// `S^2_1 x {0}` in `R^4_1` with the normal frame `(x, 0), e_4` rotated
    /// by the angle `theta(a, b)`.
    pub fn rotated_slice(theta: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        let sig = Signature::lorentzian(4).expect("valid");
        let lift = |v: DVector<f64>| DVector::from_fn(4, |i, _| if i < 3 { v[i] } else { 0.0 });
        Self::new(
            sig,
            2,
            1,
            move |x| lift(crate::reachability::lorentz_sphere_point(x[0], x[1])),
            |x| {
                let (a, b) = (x[0], x[1]);
                DMatrix::from_row_slice(
                    4,
                    2,
                    &[a.cosh(), 0.0, a.sinh() * b.sin(), a.cosh() * b.cos(), a.sinh() * b.cos(), -a.cosh() * b.sin(), 0.0, 0.0],
                )
            },
            |p| DVector::from_vec(vec![p[0].asinh(), p[1].atan2(p[2])]),
            move |x| {
                let th = theta(x);
                let n1 = lift(crate::reachability::lorentz_sphere_point(x[0], x[1]));
                let n2 = unit(4, 3);
                vec![&n1 * th.cos() + &n2 * th.sin(), &n2 * th.cos() - &n1 * th.sin()]
            },
        )
        .expect("valid chart")
        .with_christoffel(lorentz_sphere_christoffel)
    }
}

/// Analytic Christoffel symbols of `g = diag(-1, cosh^2 a)`.
pub fn lorentz_sphere_christoffel(x: &DVector<f64>) -> Christoffel {
    let a = x[0];
    let mut c = Christoffel::zeros(2);
    c.set(0, 1, 1, 0.5 * (2.0 * a).sinh());
    c.set(1, 0, 1, a.tanh());
    c.set(1, 1, 0, a.tanh());
    c
}

/// The two charts of a rolling: `chart` on the rolling manifold and
/// `chart_hat` on the stationary one.
#[derive(Clone, Debug)]
pub struct ChartPair {
    pub chart: EmbeddedChart,
    pub chart_hat: EmbeddedChart,
}

impl ChartPair {
    /// `S^2_1` in the `(a, b)` chart over its affine tangent plane at `x0`.
    pub fn lorentz_sphere_over_plane(x0: &DVector<f64>) -> Result<Self> {
        let hq = crate::hyperquadric::Hyperquadric::lorentz_sphere(2)?;
        Ok(Self { chart: EmbeddedChart::lorentz_sphere(), chart_hat: EmbeddedChart::affine_tangent(&hq, x0)? })
    }

    /// The rotated-normal slice over its affine tangent plane at `x0`.
    pub fn rotated_slice_over_plane(theta: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static, x0: &DVector<f64>) -> Result<Self> {
        let slice = HyperquadricSlice::new(crate::hyperquadric::Hyperquadric::lorentz_sphere(2)?)?;
        let chart = EmbeddedChart::rotated_slice(theta);
        let mut plane = EmbeddedChart::affine_tangent(&slice, x0)?;
        // The plane keeps the slice's rotated normals at x0 as constant normals.
        let (nrm, _) = chart.normal_frame(&chart.coords(x0))?;
        let frame = plane.tangent_frame(&DVector::zeros(2))?.0;
        plane = EmbeddedChart::affine(slice.signature(), x0.clone(), frame, nrm)?;
        Ok(Self { chart, chart_hat: plane })
    }

    fn tangent_signature(&self) -> Result<Signature> {
        self.chart.metric.signature()
    }

    fn normal_signature(&self, x: &DVector<f64>) -> Result<Signature> {
        let (_, signs) = self.chart.normal_frame(x)?;
        Signature::new(signs.len(), signs.iter().filter(|s| **s < 0.0).count())
    }
}

/// A rolling seen through a pair of charts: coordinates of the two curves
/// and the matrices `A = <ehat_i, q e_j>`, `B = <epshat_k, p eps_l>` in the
/// chart frames.
#[derive(Clone, Debug, PartialEq)]
pub struct TrivializedCurve {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub xhat: Vec<DVector<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
}

impl TrivializedCurve {
    /// Checks lengths, the time grid and the group constraints of `A` in
    /// `O(m, mu)` and `B` in `O(codim, nu - mu)`.
    pub fn new(
        times: Vec<f64>,
        x: Vec<DVector<f64>>,
        xhat: Vec<DVector<f64>>,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        sig_a: Signature,
        sig_b: Signature,
    ) -> Result<Self> {
        validate_grid(&times, 1)?;
        for len in [x.len(), xhat.len(), a.len(), b.len()] {
            check_dim(times.len(), len)?;
        }
        for (mats, sig) in [(&a, sig_a), (&b, sig_b)] {
            for m in mats.iter() {
                check_dim(sig.n(), m.nrows())?;
                check_dim(sig.n(), m.ncols())?;
                let residual = group_residual(m, sig);
                if residual > TRIVIALIZED_GROUP_TOL {
                    return Err(Error::GroupConstraint { residual });
                }
            }
        }
        Ok(Self { times, x, xhat, a, b })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Trivializes a rolling given by ambient curves and the isometry
/// differential `dg[k]` from the rolling manifold to the stationary one.
pub fn trivialize(times: &[f64], x: &[DVector<f64>], xhat: &[DVector<f64>], dg: &[DMatrix<f64>], pair: &ChartPair) -> Result<TrivializedCurve> {
    let sig = pair.chart.sig;
    check_dim(times.len(), x.len())?;
    check_dim(times.len(), xhat.len())?;
    check_dim(times.len(), dg.len())?;
    let samples: Vec<_> = (0..times.len())
        .into_par_iter()
        .map(|k| -> Result<_> {
            let xc = pair.chart.coords(&x[k]);
            let xhc = pair.chart_hat.coords(&xhat[k]);
            let (e, _) = pair.chart.tangent_frame(&xc)?;
            let (eh, _) = pair.chart_hat.tangent_frame(&xhc)?;
            let (n, _) = pair.chart.normal_frame(&xc)?;
            let (nh, _) = pair.chart_hat.normal_frame(&xhc)?;
            let pairing = |to: &[DVector<f64>], from: &[DVector<f64>]| {
                let images: Vec<DVector<f64>> = from.iter().map(|v| &dg[k] * v).collect();
                DMatrix::from_fn(to.len(), from.len(), |i, j| sig.dot(&to[i], &images[j]))
            };
            Ok((xc, xhc, pairing(&eh, &e), pairing(&nh, &n)))
        })
        .collect::<Result<Vec<_>>>()?;
    let sig_a = pair.tangent_signature()?;
    let sig_b = pair.normal_signature(&samples[0].0)?;
    let mut xs = Vec::with_capacity(samples.len());
    let mut xhs = Vec::with_capacity(samples.len());
    let mut a = Vec::with_capacity(samples.len());
    let mut b = Vec::with_capacity(samples.len());
    for (xc, xhc, am, bm) in samples {
        xs.push(xc);
        xhs.push(xhc);
        a.push(am);
        b.push(bm);
    }
    TrivializedCurve::new(times.to_vec(), xs, xhs, a, b, sig_a, sig_b)
}

/// Trivializes a hyperquadric rolling over its affine tangent plane.
pub fn trivialize_rolling(traj: &RollingTrajectory, pair: &ChartPair) -> Result<TrivializedCurve> {
    let (x, xhat) = curves(traj);
    let dg: Vec<DMatrix<f64>> = (0..traj.len()).map(|k| traj.r_inv(k)).collect();
    trivialize(&traj.times, &x.points, &xhat.points, &dg, pair)
}

/// The non-twisted lift of a tangent vector at one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Lift {
    /// Predicted velocity of the development in `chart_hat` coordinates.
    pub xhat_dot: DVector<f64>,
    /// `w_ij = <nabla_v e_j, e_i> - <nabla_{qv} q e_j, q e_i>`; `A' = A J w`.
    pub w: DMatrix<f64>,
    /// Normal analogue; `B' = B J w_perp`.
    pub w_perp: DMatrix<f64>,
    /// Predicted `A'`.
    pub a_dot: DMatrix<f64>,
    /// Predicted `B'`.
    pub b_dot: DMatrix<f64>,
}

/// Lift of `v` (chart coordinates at `x`) at the configuration
/// `(x, xhat, A, B)`.
pub fn lift(pair: &ChartPair, x: &DVector<f64>, xhat: &DVector<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, v: &DVector<f64>) -> Result<Lift> {
    let chart = &pair.chart.metric;
    let chart_hat = &pair.chart_hat.metric;
    check_dim(chart.dim, chart_hat.dim)?;
    check_dim(chart.dim, v.len())?;
    let (e, signs) = chart.frame(x)?;
    let (eh, signs_hat) = chart_hat.frame(xhat)?;
    if signs != signs_hat {
        return Err(Error::Frame("tangent frames of the two charts have different signs".into()));
    }
    let j = diag(&signs);
    let c = e.clone().try_inverse().ok_or(Error::DegenerateSubspace)? * v;
    let y_frame = &j * a * &c;
    let xhat_dot = &eh * &y_frame;
    let omega = connection_form(chart, x, v)?;
    let omega_hat = connection_form(chart_hat, xhat, &xhat_dot)?;
    let w = omega - a.transpose() * &j * omega_hat * &j * a;
    let a_dot = a * &j * &w;

    let (_, nsigns) = pair.chart.normal_frame(x)?;
    let (_, nsigns_hat) = pair.chart_hat.normal_frame(xhat)?;
    if nsigns != nsigns_hat {
        return Err(Error::Frame("normal frames of the two charts have different signs".into()));
    }
    let jn = diag(&nsigns);
    let nperp = pair.chart.normal_connection(x, v)?;
    let nperp_hat = pair.chart_hat.normal_connection(xhat, &xhat_dot)?;
    let w_perp = nperp - b.transpose() * &jn * nperp_hat * &jn * b;
    let b_dot = b * &jn * &w_perp;
    Ok(Lift { xhat_dot, w, w_perp, a_dot, b_dot })
}

/// Per-sample distance of a trivialized curve from the rolling distribution:
/// the largest entry of `xhat' - q x'`, `A' - lift` and `B' - lift` with
/// derivatives by finite differences.
pub fn horizontality_residual(curve: &TrivializedCurve, pair: &ChartPair) -> Result<Vec<f64>> {
    let xd = differentiate(&curve.times, &curve.x)?;
    let xhd = differentiate(&curve.times, &curve.xhat)?;
    let ad = differentiate(&curve.times, &curve.a)?;
    let bd = differentiate(&curve.times, &curve.b)?;
    (0..curve.len())
        .into_par_iter()
        .map(|k| {
            let l = lift(pair, &curve.x[k], &curve.xhat[k], &curve.a[k], &curve.b[k], &xd[k])?;
            Ok((&xhd[k] - &l.xhat_dot).amax().max((&ad[k] - &l.a_dot).amax()).max((&bd[k] - &l.b_dot).amax()))
        })
        .collect()
}

/// One sample of [`causal_trace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalTraceSample {
    pub t: f64,
    /// `-tr U^2` with `U = A^{-1} A'`.
    pub value: f64,
    /// `<<A', A'>>` computed directly.
    pub j_inner: f64,
    pub class: CausalClass,
}

/// Causal character of a curve in `O(sig)`, from `U = A^{-1} A'` with `A'`
/// by finite differences.
pub fn causal_trace(times: &[f64], a: &[DMatrix<f64>], sig: Signature) -> Result<Vec<CausalTraceSample>> {
    for m in a {
        check_dim(sig.n(), m.nrows())?;
        check_dim(sig.n(), m.ncols())?;
        let residual = group_residual(m, sig);
        if residual > TRIVIALIZED_GROUP_TOL {
            return Err(Error::GroupConstraint { residual });
        }
    }
    let ad = differentiate(times, a)?;
    let j = sig.gram();
    (0..a.len())
        .into_par_iter()
        .map(|k| {
            let u = &j * a[k].transpose() * &j * &ad[k];
            let value = -(&u * &u).trace();
            let j_inner = matrix_j_inner(&ad[k], &ad[k], sig)?;
            let is_zero = ad[k].amax() <= CAUSAL_TRACE_TOL;
            Ok(CausalTraceSample { t: times[k], value, j_inner, class: CausalClass::from_square(value, is_zero, CAUSAL_TRACE_TOL) })
        })
        .collect()
}

/// One sample of [`causal_trace_formula`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalFormulaSample {
    pub t: f64,
    pub tangent: f64,
    pub tangent_class: CausalClass,
    pub normal: f64,
    pub normal_class: CausalClass,
}

/// The explicit chart expression for the causal character of `A` and `B`:
/// `sum eps_i eps_h w_ih^2` with
/// `w_ih = sum_k x'^k Gamma^i_{kh} - sum_{s,l} eps_s eps_l a_si a_lh sum_k xhat'^k Gammahat^s_{kl}`
/// in frame components, and the same with normal connection coefficients.
pub fn causal_trace_formula(curve: &TrivializedCurve, pair: &ChartPair) -> Result<Vec<CausalFormulaSample>> {
    let xd = differentiate(&curve.times, &curve.x)?;
    let xhd = differentiate(&curve.times, &curve.xhat)?;
    let chart = &pair.chart.metric;
    let chart_hat = &pair.chart_hat.metric;
    (0..curve.len())
        .into_par_iter()
        .map(|k| {
            let (x, xh) = (&curve.x[k], &curve.xhat[k]);
            let (e, eps) = chart.frame(x)?;
            let (eh, _) = chart_hat.frame(xh)?;
            let c = e.clone().try_inverse().ok_or(Error::DegenerateSubspace)? * &xd[k];
            let ch = eh.clone().try_inverse().ok_or(Error::DegenerateSubspace)? * &xhd[k];
            let gam = frame_christoffel(chart, x)?;
            let gam_hat = frame_christoffel(chart_hat, xh)?;
            let tangent = formula_sum(&c, &ch, &eps, &curve.a[k], |i, kk, h| gam.get(i, kk, h), |i, kk, h| gam_hat.get(i, kk, h));

            // Normal side: connection coefficients along the frame directions.
            let (_, neps) = pair.chart.normal_frame(x)?;
            let mm = e.ncols();
            let np: Vec<DMatrix<f64>> = (0..mm).map(|kk| pair.chart.normal_connection(x, &e.column(kk).into_owned())).collect::<Result<_>>()?;
            let nph: Vec<DMatrix<f64>> =
                (0..mm).map(|kk| pair.chart_hat.normal_connection(xh, &eh.column(kk).into_owned())).collect::<Result<_>>()?;
            let normal = formula_sum(&c, &ch, &neps, &curve.b[k], |i, kk, h| np[kk][(i, h)], |i, kk, h| nph[kk][(i, h)]);

            let class = |(value, w_max): (f64, f64)| CausalClass::from_square(value, w_max <= CAUSAL_TRACE_TOL, CAUSAL_TRACE_TOL);
            Ok(CausalFormulaSample {
                t: curve.times[k],
                tangent: tangent.0,
                tangent_class: class(tangent),
                normal: normal.0,
                normal_class: class(normal),
            })
        })
        .collect()
}

/// Returns the value and the largest `|w_ih|`.
fn formula_sum(
    c: &DVector<f64>,
    ch: &DVector<f64>,
    eps: &[f64],
    a: &DMatrix<f64>,
    gam: impl Fn(usize, usize, usize) -> f64,
    gam_hat: impl Fn(usize, usize, usize) -> f64,
) -> (f64, f64) {
    let r = eps.len();
    let m = c.len();
    let mut total = 0.0;
    let mut w_max: f64 = 0.0;
    for i in 0..r {
        for h in 0..r {
            let mut w: f64 = (0..m).map(|k| c[k] * gam(i, k, h)).sum();
            for s in 0..r {
                for l in 0..r {
                    let coeff = eps[s] * eps[l] * a[(s, i)] * a[(l, h)];
                    if coeff != 0.0 {
                        w -= coeff * (0..m).map(|k| ch[k] * gam_hat(s, k, l)).sum::<f64>();
                    }
                }
            }
            total += eps[i] * eps[h] * w * w;
            w_max = w_max.max(w.abs());
        }
    }
    (total, w_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Control;
    use crate::diff::uniform_grid;
    use crate::hyperquadric::Hyperquadric;
    use crate::indefinite::rotation;
    use crate::kinematics::integrate_kinematics;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn flat_charts_have_no_christoffels() {
        let chart = MetricChart::constant(dmatrix![-1.0, 0.0; 0.0, 1.0]).unwrap();
        assert_eq!(christoffel(&chart, &dvector![0.3, 0.1]).unwrap(), Christoffel::zeros(2));
        let scaled = MetricChart::new(2, 1, |_| dmatrix![-3.0, 0.0; 0.0, 3.0]).unwrap();
        assert!(christoffel(&scaled, &dvector![0.3, 0.1]).unwrap().max_abs_diff(&Christoffel::zeros(2)) < 1e-9);
    }

    #[test]
    fn sphere_christoffels_match_closed_form() {
        let chart = EmbeddedChart::lorentz_sphere();
        for x in [dvector![0.0, 0.0], dvector![0.7, -0.4], dvector![-1.2, 2.0]] {
            let fd = christoffel_fd(chart.metric_chart(), &x).unwrap();
            let exact = lorentz_sphere_christoffel(&x);
            assert!(fd.max_abs_diff(&exact) < 1e-6, "{x}");
        }
        let err = |h: f64| christoffel_fd_with_step(chart.metric_chart(), &dvector![0.8, 0.3], h).unwrap().max_abs_diff(&lorentz_sphere_christoffel(&dvector![0.8, 0.3]));
        let ratio = err(1e-2) / err(5e-3);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let chart = MetricChart::new(2, 1, |x| dmatrix![-1.0, 0.0; 0.0, x[0]]).unwrap();
        assert!(matches!(christoffel(&chart, &dvector![0.0, 0.0]), Err(Error::MetricDegeneracy { .. })));
    }

    #[test]
    fn sphere_frame_and_connection() {
        let chart = EmbeddedChart::lorentz_sphere();
        let x = dvector![0.5, 0.2];
        let (e, signs) = chart.metric_chart().frame(&x).unwrap();
        assert_eq!(signs, vec![-1.0, 1.0]);
        assert!((e - dmatrix![1.0, 0.0; 0.0, 1.0 / 0.5f64.cosh()]).amax() < 1e-14);
        // Only the b-direction turns the frame: nabla_{d_b} e_2 = sinh(a) e_1.
        let w = connection_form(chart.metric_chart(), &x, &dvector![0.0, 1.0]).unwrap();
        assert!((w[(0, 1)] + 0.5f64.sinh()).abs() < 1e-8, "{w}");
        assert!((w[(1, 0)] - 0.5f64.sinh()).abs() < 1e-8);
        let w = connection_form(chart.metric_chart(), &x, &dvector![1.0, 0.0]).unwrap();
        assert!(w.amax() < 1e-8);
    }

    fn benchmark(u: DVector<f64>, t_end: f64) -> (RollingTrajectory, ChartPair) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0];
        let times = uniform_grid(0.0, t_end, 1e-3).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times).unwrap();
        (traj, ChartPair::lorentz_sphere_over_plane(&x0).unwrap())
    }

    #[test]
    fn lift_is_linear_and_vanishes_at_zero() {
        let (_, pair) = benchmark(dvector![1.0, 0.0, 0.0], 0.1);
        let x = dvector![0.3, 0.2];
        let xh = dvector![0.1, -0.2];
        let a = rotation(2, 0, 1, 0.0) * dmatrix![2f64.sqrt(), 1.0; 1.0, 2f64.sqrt()];
        let b = dmatrix![1.0];
        let zero = lift(&pair, &x, &xh, &a, &b, &dvector![0.0, 0.0]).unwrap();
        assert_eq!(zero.w.amax(), 0.0);
        let v = dvector![0.4, -1.0];
        let w = dvector![1.5, 0.25];
        let lv = lift(&pair, &x, &xh, &a, &b, &v).unwrap();
        let lw = lift(&pair, &x, &xh, &a, &b, &w).unwrap();
        let lsum = lift(&pair, &x, &xh, &a, &b, &(&v * 2.0 - &w)).unwrap();
        assert!((lsum.w - (lv.w * 2.0 - lw.w)).amax() < 1e-7);
    }

    #[test]
    fn flat_pair_lift_vanishes() {
        let sig = Signature::lorentzian(3).unwrap();
        let basis = vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]];
        let normals = vec![dvector![0.0, 0.0, 1.0]];
        let flat = EmbeddedChart::affine(sig, dvector![0.0, 0.0, 1.0], basis.clone(), normals.clone()).unwrap();
        let flat2 = EmbeddedChart::affine(sig, dvector![0.0, 0.0, 2.0], basis, normals).unwrap();
        let pair = ChartPair { chart: flat, chart_hat: flat2 };
        let a = dmatrix![2f64.sqrt(), 1.0; 1.0, 2f64.sqrt()];
        let l = lift(&pair, &dvector![0.3, 0.1], &dvector![-1.0, 0.2], &a, &dmatrix![1.0], &dvector![0.7, 0.2]).unwrap();
        assert_eq!(l.w.amax(), 0.0);
        assert_eq!(l.a_dot.amax(), 0.0);
    }

    #[test]
    fn rollings_are_horizontal() {
        for u in [dvector![1.0, 0.0, 0.0], dvector![0.5, 1.0, 0.0], dvector![1.0, 1.0, 0.0]] {
            let (traj, pair) = benchmark(u, 1.0);
            let curve = trivialize_rolling(&traj, &pair).unwrap();
            let res = horizontality_residual(&curve, &pair).unwrap();
            let worst = res.iter().cloned().fold(0.0, f64::max);
            assert!(worst < 1e-6, "{worst}");

            let mut frozen = curve.clone();
            let a0 = frozen.a[0].clone();
            frozen.a.iter_mut().for_each(|a| *a = a0.clone());
            let res = horizontality_residual(&frozen, &pair).unwrap();
            let moving = curve.a.iter().any(|a| (a - &a0).amax() > 1e-3);
            assert_eq!(moving, res.iter().filter(|r| **r > 1e-4).count() > res.len() / 2);
        }
    }

    #[test]
    fn stationary_curve_is_horizontal() {
        let (_, pair) = benchmark(dvector![1.0, 0.0, 0.0], 0.1);
        let times = vec![0.0, 0.1, 0.2, 0.3];
        let a = dmatrix![-(2f64.sqrt()), 1.0; -1.0, 2f64.sqrt()];
        let curve = TrivializedCurve::new(
            times,
            vec![dvector![0.2, 0.1]; 4],
            vec![dvector![0.0, 0.3]; 4],
            vec![a; 4],
            vec![dmatrix![1.0]; 4],
            Signature::new(2, 1).unwrap(),
            Signature::new(1, 0).unwrap(),
        )
        .unwrap();
        assert!(horizontality_residual(&curve, &pair).unwrap().iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn trace_of_rotation_matrices() {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0];
        let times = uniform_grid(0.0, 1.0, 1e-3).unwrap();
        let sig = hq.signature();
        for (u, expected) in [(dvector![1.0, 0.0, 0.0], -2.0), (dvector![0.0, 1.0, 0.0], 2.0)] {
            let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times).unwrap();
            for s in causal_trace(&times, &traj.r, sig).unwrap() {
                assert!((s.value - expected).abs() < 1e-6);
                assert!((s.j_inner - expected).abs() < 1e-6);
            }
        }
        let constant = vec![DMatrix::identity(3, 3); 5];
        let out = causal_trace(&[0.0, 1.0, 2.0, 3.0, 4.0], &constant, sig).unwrap();
        assert!(out.iter().all(|s| s.value.abs() < 1e-12 && s.class == CausalClass::Spacelike));
        assert!(matches!(causal_trace(&[0.0, 1.0, 2.0], &vec![dmatrix![2.0, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 1.0]; 3], sig), Err(Error::GroupConstraint { .. })));
    }

    #[test]
    fn formula_matches_trace_on_benchmark() {
        for u in [dvector![1.0, 0.5, 0.0], dvector![0.5, 1.0, 0.0], dvector![1.0, 1.0, 0.0]] {
            let (traj, pair) = benchmark(u, 1.0);
            let curve = trivialize_rolling(&traj, &pair).unwrap();
            let trace = causal_trace(&curve.times, &curve.a, Signature::new(2, 1).unwrap()).unwrap();
            let formula = causal_trace_formula(&curve, &pair).unwrap();
            for (t, f) in trace.iter().zip(&formula) {
                assert!((t.value - f.tangent).abs() < 1e-5, "{} vs {}", t.value, f.tangent);
                assert!((t.value - t.j_inner).abs() < 1e-10);
                assert!(f.normal.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn codimension_two_normal_side() {
        let theta = |x: &DVector<f64>| 0.3 * x[0] + 0.5 * x[1];
        let slice = HyperquadricSlice::new(Hyperquadric::lorentz_sphere(2).unwrap()).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0, 0.0];
        let pair = ChartPair::rotated_slice_over_plane(theta, &x0).unwrap();
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let times = uniform_grid(0.0, 1.0, 1e-3).unwrap();
        let traj = integrate_kinematics(&hq, &dvector![0.0, 0.0, 1.0], &Control::constant(dvector![0.5, 1.0, 0.0]), &times).unwrap();
        let (x, xhat) = curves(&traj);
        let lift4 = |v: &DVector<f64>| slice.lift(v);
        let xs: Vec<_> = x.points.iter().map(lift4).collect();
        let xhs: Vec<_> = xhat.points.iter().map(lift4).collect();
        let dg: Vec<_> = (0..traj.len())
            .map(|k| {
                let mut g = DMatrix::identity(4, 4);
                g.view_mut((0, 0), (3, 3)).copy_from(&traj.r_inv(k));
                g
            })
            .collect();
        let curve = trivialize(&times, &xs, &xhs, &dg, &pair).unwrap();
        assert!((&curve.b[curve.len() - 1] - &curve.b[0]).amax() > 0.1);
        let worst = horizontality_residual(&curve, &pair).unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        let trace = causal_trace(&times, &curve.b, Signature::euclidean(2).unwrap()).unwrap();
        let formula = causal_trace_formula(&curve, &pair).unwrap();
        for (t, f) in trace.iter().zip(&formula) {
            assert!((t.value - f.normal).abs() < 1e-5, "{} vs {}", t.value, f.normal);
            assert!(f.normal > 0.0 && f.normal_class == CausalClass::Spacelike);
        }
    }
}
