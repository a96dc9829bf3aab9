//! Intrinsic view of rolling: parallel frames along the two curves, the
//! constant matrices relating them, and the freedom left once the rolling
//! curve is fixed.

use nalgebra::{DMatrix, DVector};

use crate::diff::{differentiate, differentiate2};
use crate::error::{check_dim, Error, Result};
use crate::hyperquadric::{covariant_derivative, normal_derivative, transport_propagators, CurveSamples, Geometry};
use crate::indefinite::{orientation_component, orthonormalize_with, GroupChoice, GroupElement, Signature};
use crate::kinematics::{curves, RollingTrajectory, TransportFlavor};

/// Orthonormality tolerance for user-supplied initial frames.
pub const FRAME_TOL: f64 = 1e-8;
/// Default bound on the covariant derivative of a frame claimed parallel.
pub const DEFAULT_PARALLEL_TOL: f64 = 1e-4;
/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// A frame carried parallel along a sampled curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelFrame {
    pub times: Vec<f64>,
    /// `vectors[k][i]` is the `i`-th frame vector at `times[k]`.
    pub vectors: Vec<Vec<DVector<f64>>>,
    /// `<f_i, f_i>`, each `+1` or `-1`.
    pub signs: Vec<f64>,
    pub flavor: TransportFlavor,
}

impl ParallelFrame {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of frame vectors.
    pub fn rank(&self) -> usize {
        self.signs.len()
    }

    /// The `i`-th frame vector as a field along the curve.
    pub fn field(&self, i: usize) -> Vec<DVector<f64>> {
        self.vectors.iter().map(|f| f[i].clone()).collect()
    }

    /// Components `eps_i <f_i, v>` of `v` in the frame at sample `k`.
    pub fn coordinates(&self, sig: Signature, k: usize, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rank(), self.vectors[k].iter().zip(&self.signs).map(|(f, s)| s * sig.dot(f, v)))
    }

    /// Largest departure of the frame Gram matrix from `diag(signs)`.
    pub fn gram_residual(&self, sig: Signature) -> f64 {
        self.vectors.iter().map(|f| gram_defect(f, &self.signs, sig)).fold(0.0, f64::max)
    }

    /// Largest covariant (tangent frames) or normal (normal frames)
    /// derivative of a frame vector.
    pub fn parallel_residual(&self, geom: &dyn Geometry, curve: &CurveSamples) -> Result<f64> {
        check_dim(curve.len(), self.len())?;
        let mut worst: f64 = 0.0;
        for i in 0..self.rank() {
            let field = self.field(i);
            let d = match self.flavor {
                TransportFlavor::Tangent => covariant_derivative(geom, curve, &field)?,
                TransportFlavor::Normal => normal_derivative(geom, curve, &field)?,
            };
            worst = d.iter().map(|v| v.amax()).fold(worst, f64::max);
        }
        Ok(worst)
    }
}

fn gram_defect(f: &[DVector<f64>], signs: &[f64], sig: Signature) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in f.iter().enumerate() {
        for (j, b) in f.iter().enumerate() {
            let target = if i == j { signs[i] } else { 0.0 };
            worst = worst.max((sig.dot(a, b) - target).abs());
        }
    }
    worst
}

/// Carries an orthonormal frame of `T_{x(0)}` or of the normal space at
/// `x(0)` parallel along `curve`.
pub fn parallel_frame_along(
    geom: &dyn Geometry,
    curve: &CurveSamples,
    initial: &[DVector<f64>],
    flavor: TransportFlavor,
) -> Result<ParallelFrame> {
    let sig = geom.signature();
    let n = sig.n();
    check_dim(n, curve.ambient_dim())?;
    let expected = match flavor {
        TransportFlavor::Tangent => geom.dim(),
        TransportFlavor::Normal => geom.codim(),
    };
    if initial.len() != expected {
        return Err(Error::Frame(format!("expected {expected} vectors, got {}", initial.len())));
    }
    let x0 = &curve.points[0];
    let mut signs = Vec::with_capacity(expected);
    for (i, f) in initial.iter().enumerate() {
        check_dim(n, f.len())?;
        let tangent = geom.tangent_project(x0, f)?;
        let off = match flavor {
            TransportFlavor::Tangent => (f - &tangent).amax(),
            TransportFlavor::Normal => tangent.amax(),
        };
        if off > FRAME_TOL * f.amax().max(1.0) {
            return Err(Error::Frame(format!("vector {i} is not in the {flavor:?} space (off by {off:e})").to_lowercase()));
        }
        signs.push(if sig.dot(f, f) < 0.0 { -1.0 } else { 1.0 });
    }
    let defect = gram_defect(initial, &signs, sig);
    if defect > FRAME_TOL {
        return Err(Error::Frame(format!("vectors are not orthonormal (Gram defect {defect:e})")));
    }
    let props = transport_propagators(geom, curve)?;
    let vectors = props.iter().map(|p| initial.iter().map(|f| p * f).collect()).collect();
    Ok(ParallelFrame { times: curve.times.clone(), vectors, signs, flavor })
}

/// Tangent and normal parallel frames along one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub tangent: ParallelFrame,
    pub normal: ParallelFrame,
}

impl FrameSet {
    pub fn along(geom: &dyn Geometry, curve: &CurveSamples, tangent: &[DVector<f64>], normal: &[DVector<f64>]) -> Result<Self> {
        Ok(Self {
            tangent: parallel_frame_along(geom, curve, tangent, TransportFlavor::Tangent)?,
            normal: parallel_frame_along(geom, curve, normal, TransportFlavor::Normal)?,
        })
    }
}

/// One side of a rolling: a geometry, a curve in it and frames along it.
#[derive(Clone, Copy)]
pub struct RollingSide<'a> {
    pub geom: &'a dyn Geometry,
    pub curve: &'a CurveSamples,
    pub frames: &'a FrameSet,
}

/// `A_ij = <ehat_i, q e_j>` and `B = <epshat, p eps>` over time, with their
/// averages. Both are constant for a rolling with parallel frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a_series: Vec<DMatrix<f64>>,
    pub b_series: Vec<DMatrix<f64>>,
    /// Largest entrywise distance of any sample from the averages.
    pub deviation: f64,
}

/// Configuration matrices of a hyperquadric rolling, where `q = R^{-1}`
/// on tangent spaces and `p = R^{-1}` on normal spaces.
///
/// `along_x` must be parallel along the rolling curve and `along_xhat`
/// along the development, to within `tol`.
pub fn configuration_matrices(traj: &RollingTrajectory, along_x: &FrameSet, along_xhat: &FrameSet, tol: f64) -> Result<ConfigurationMatrices> {
    let (x, xhat) = curves(traj);
    let plane = traj.affine_plane();
    let dg: Vec<DMatrix<f64>> = (0..traj.len()).map(|k| traj.r_inv(k)).collect();
    configuration_matrices_general(
        RollingSide { geom: &traj.hq, curve: &x, frames: along_x },
        RollingSide { geom: &plane, curve: &xhat, frames: along_xhat },
        &dg,
        tol,
    )
}

/// Configuration matrices for any rolling given the ambient isometry
/// differential `dg[k]` carrying the first side onto the second.
pub fn configuration_matrices_general(side: RollingSide<'_>, side_hat: RollingSide<'_>, dg: &[DMatrix<f64>], tol: f64) -> Result<ConfigurationMatrices> {
    let sig = side.geom.signature();
    let len = side.curve.len();
    check_dim(len, side_hat.curve.len())?;
    check_dim(len, dg.len())?;
    for frame in [&side.frames.tangent, &side.frames.normal, &side_hat.frames.tangent, &side_hat.frames.normal] {
        check_dim(len, frame.len())?;
    }
    check_dim(side.frames.tangent.rank(), side_hat.frames.tangent.rank())?;
    check_dim(side.frames.normal.rank(), side_hat.frames.normal.rank())?;
    for (s, name) in [(side, "rolling curve"), (side_hat, "development")] {
        for frame in [&s.frames.tangent, &s.frames.normal] {
            let res = frame.parallel_residual(s.geom, s.curve)?;
            if res > tol {
                return Err(Error::Frame(format!("frame along the {name} is not parallel (residual {res:e})")));
            }
        }
    }
    let pair = |from: &ParallelFrame, to: &ParallelFrame, k: usize| {
        let images: Vec<DVector<f64>> = from.vectors[k].iter().map(|e| &dg[k] * e).collect();
        DMatrix::from_fn(to.rank(), from.rank(), |i, j| sig.dot(&to.vectors[k][i], &images[j]))
    };
    let a_series: Vec<_> = (0..len).map(|k| pair(&side.frames.tangent, &side_hat.frames.tangent, k)).collect();
    let b_series: Vec<_> = (0..len).map(|k| pair(&side.frames.normal, &side_hat.frames.normal, k)).collect();
    let (a, da) = mean_and_spread(&a_series);
    let (b, db) = mean_and_spread(&b_series);
    Ok(ConfigurationMatrices { a, b, a_series, b_series, deviation: da.max(db) })
}

fn mean_and_spread(series: &[DMatrix<f64>]) -> (DMatrix<f64>, f64) {
    let mut mean = series[0].clone() * 0.0;
    for m in series {
        mean += m;
    }
    mean /= series.len() as f64;
    let spread = series.iter().map(|m| (m - &mean).amax()).fold(0.0, f64::max);
    (mean, spread)
}

/// Rows are the frame coordinates of the velocity at each sample.
fn velocity_coordinates(curve: &CurveSamples, frame: &ParallelFrame, sig: Signature) -> Result<DMatrix<f64>> {
    check_dim(curve.len(), frame.len())?;
    let vel = curve.velocities()?;
    let m = frame.rank();
    let mut c = DMatrix::zeros(vel.len(), m);
    for (k, v) in vel.iter().enumerate() {
        c.row_mut(k).copy_from(&frame.coordinates(sig, k, v).transpose());
    }
    Ok(c)
}

/// Orthonormal basis of the null space of `c` (as columns) and the rank.
fn null_space(c: &DMatrix<f64>, tol: f64) -> (usize, Vec<DVector<f64>>) {
    let m = c.ncols();
    let rows = c.nrows().max(m);
    let mut padded = DMatrix::zeros(rows, m);
    padded.view_mut((0, 0), (c.nrows(), m)).copy_from(c);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let mut rank = 0;
    let mut null = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if smax > 0.0 && *s > tol * smax {
            rank += 1;
        } else {
            null.push(v_t.row(i).transpose());
        }
    }
    (rank, null)
}

/// Dimension `k` of the space of parallel tangent fields along `curve`
/// that stay orthogonal to its velocity.
pub fn freedom_dimension(geom: &dyn Geometry, curve: &CurveSamples, frame: &ParallelFrame, tol: f64) -> Result<usize> {
    let sig = geom.signature();
    let c = velocity_coordinates(curve, frame, sig)? * diag(&frame.signs);
    Ok(frame.rank() - null_space(&c, tol).0)
}

fn diag(signs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(signs))
}

/// A reordering of a parallel frame whose first `k` vectors span the
/// velocity-orthogonal parallel fields, timelike first.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedFrame {
    pub k: usize,
    /// Number of timelike vectors among the first `k`.
    pub xi: usize,
    /// Columns are the new frame vectors in the old frame coordinates.
    pub change: DMatrix<f64>,
    pub signs: Vec<f64>,
}

impl AdaptedFrame {
    /// The adapted frame as a parallel frame.
    pub fn apply(&self, frame: &ParallelFrame) -> ParallelFrame {
        let m = frame.rank();
        let vectors = frame
            .vectors
            .iter()
            .map(|f| {
                (0..m)
                    .map(|a| {
                        let mut v = f[0].clone() * 0.0;
                        for (j, e) in f.iter().enumerate() {
                            v.axpy(self.change[(j, a)], e, 1.0);
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        ParallelFrame { times: frame.times.clone(), vectors, signs: self.signs.clone(), flavor: frame.flavor }
    }
}

/// Builds the adapted frame. Fails with `Normalization` when the
/// orthogonal parallel fields span a degenerate space, as for null curves.
pub fn adapted_frame(geom: &dyn Geometry, curve: &CurveSamples, frame: &ParallelFrame, tol: f64) -> Result<AdaptedFrame> {
    let sig = geom.signature();
    let m = frame.rank();
    let jm = diag(&frame.signs);
    let c = velocity_coordinates(curve, frame, sig)?;
    let (_, v) = null_space(&(&c * &jm), tol);
    let form = |a: &DVector<f64>, b: &DVector<f64>| a.iter().zip(b.iter()).zip(&frame.signs).map(|((x, y), s)| s * x * y).sum::<f64>();
    let degenerate = |_: Error| {
        let speed = curve.velocities().map(|v| sig.dot(&v[0], &v[0])).unwrap_or(0.0);
        Error::Normalization { norm: speed }
    };
    let v_frame = orthonormalize_with(&v, form, tol).map_err(degenerate)?;
    if v_frame.len() != v.len() {
        return Err(degenerate(Error::DegenerateSubspace));
    }
    let v_basis = timelike_first(v_frame.vectors, v_frame.signs);
    // Complement: vectors orthogonal to V under the frame form.
    let vt = DMatrix::from_fn(v_basis.0.len(), m, |i, j| v_basis.0[i][j] * frame.signs[j]);
    let comp: Vec<DVector<f64>> = if v_basis.0.is_empty() {
        (0..m).map(|j| DVector::from_fn(m, |i, _| if i == j { 1.0 } else { 0.0 })).collect()
    } else {
        null_space(&vt, tol).1
    };
    let w_frame = orthonormalize_with(&comp, form, tol).map_err(degenerate)?;
    if w_frame.len() + v_basis.0.len() != m {
        return Err(degenerate(Error::DegenerateSubspace));
    }
    let w_basis = timelike_first(w_frame.vectors, w_frame.signs);
    let k = v_basis.0.len();
    let xi = v_basis.1.iter().filter(|s| **s < 0.0).count();
    let cols: Vec<DVector<f64>> = v_basis.0.into_iter().chain(w_basis.0).collect();
    let signs = v_basis.1.into_iter().chain(w_basis.1).collect();
    Ok(AdaptedFrame { k, xi, change: DMatrix::from_columns(&cols), signs })
}

fn timelike_first(vectors: Vec<DVector<f64>>, signs: Vec<f64>) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut pairs: Vec<_> = vectors.into_iter().zip(signs).collect();
    pairs.sort_by_key(|(_, s)| *s > 0.0);
    pairs.into_iter().unzip()
}

/// Orientation check of a pseudo-orthogonal map between frames with the
/// given signs, after moving timelike indices first on both sides.
fn check_frame_map(mat: &DMatrix<f64>, out_signs: &[f64], in_signs: &[f64], group: GroupChoice) -> Result<()> {
    let m = in_signs.len();
    if mat.nrows() != out_signs.len() || mat.ncols() != m {
        return Err(Error::Dimension { expected: m, got: mat.ncols() });
    }
    let residual = (mat.transpose() * diag(out_signs) * mat - diag(in_signs)).amax();
    if residual > FRAME_TOL.sqrt() {
        return Err(Error::Signature(format!("map does not preserve the frame metric (residual {residual:e})")));
    }
    let order = |signs: &[f64]| {
        let mut idx: Vec<usize> = (0..signs.len()).collect();
        idx.sort_by_key(|&i| signs[i] > 0.0);
        idx
    };
    let (ro, co) = (order(out_signs), order(in_signs));
    let nu = in_signs.iter().filter(|s| **s < 0.0).count();
    let permuted = DMatrix::from_fn(m, m, |i, j| mat[(ro[i], co[j])]);
    let g = GroupElement::new(permuted, Signature::new(m, nu)?, FRAME_TOL.sqrt())?;
    let comp = orientation_component(&g)?;
    if !group.contains(comp) {
        return Err(Error::Signature(format!("map lies in the {comp:?} component, outside {group:?}")));
    }
    Ok(())
}

/// The configuration matrix of another rolling along the same curve:
/// `A diag(A', I)`, with `A` written in an adapted frame and `A'` acting on
/// the first `k` coordinates, where it must lie in `group` for `R^k_xi`.
pub fn freedom_action(a: &DMatrix<f64>, adapted: &AdaptedFrame, a_prime: &DMatrix<f64>, group: GroupChoice) -> Result<DMatrix<f64>> {
    let m = adapted.signs.len();
    if a.nrows() != m || a.ncols() != m {
        return Err(Error::Dimension { expected: m, got: a.ncols() });
    }
    let k = adapted.k;
    if k == 0 {
        check_dim(0, a_prime.nrows())?;
        return Ok(a.clone());
    }
    check_frame_map(a_prime, &adapted.signs[..k], &adapted.signs[..k], group)?;
    let mut block = DMatrix::identity(m, m);
    block.view_mut((0, 0), (k, k)).copy_from(a_prime);
    Ok(a * block)
}

/// [`freedom_action`] for `A` written in the original frame.
pub fn freedom_action_in_frame(a: &DMatrix<f64>, adapted: &AdaptedFrame, a_prime: &DMatrix<f64>, group: GroupChoice) -> Result<DMatrix<f64>> {
    let s = &adapted.change;
    let s_inv = s.clone().try_inverse().ok_or(Error::DegenerateSubspace)?;
    Ok(freedom_action(&(a * s), adapted, a_prime, group)? * s_inv)
}

/// Isometry `g0` of the ambient space fixing the normal space and the
/// development velocity at the start, such that rolling from
/// `R(0) = R_old(0) g0^{-1}` has tangent configuration matrix `a_new`.
pub fn freedom_rotation(traj: &RollingTrajectory, along_x: &FrameSet, along_xhat: &FrameSet, a_new: &DMatrix<f64>) -> Result<GroupElement> {
    let sig = traj.signature();
    let n = sig.n();
    let q = traj.r_inv(0);
    let e = &along_x.tangent;
    let ehat = &along_xhat.tangent;
    let m = e.rank();
    if a_new.nrows() != m || a_new.ncols() != m {
        return Err(Error::Dimension { expected: m, got: a_new.ncols() });
    }
    let mut g = DMatrix::zeros(n, n);
    let mut add = |from: &DVector<f64>, to: &DVector<f64>, sign: f64| {
        g += to * (sig.left_mul(&DMatrix::from_column_slice(n, 1, from.as_slice())).transpose()) * sign;
    };
    for j in 0..m {
        let from = &q * &e.vectors[0][j];
        let mut to = DVector::zeros(n);
        for i in 0..m {
            to.axpy(ehat.signs[i] * a_new[(i, j)], &ehat.vectors[0][i], 1.0);
        }
        add(&from, &to, e.signs[j]);
    }
    for (lam, nrm) in along_x.normal.vectors[0].iter().enumerate() {
        let img = &q * nrm;
        add(&img, &img, along_x.normal.signs[lam]);
    }
    GroupElement::new(g, sig, FRAME_TOL.sqrt())
}

/// Normal-bundle isometries `p(t)` that keep `B` constant in parallel frames.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalExtension {
    /// Ambient matrices acting on the normal spaces along the first curve.
    pub p: Vec<DMatrix<f64>>,
    /// `B0 = Jhat P0`.
    pub b0: DMatrix<f64>,
}

/// Extends a tangent rolling to an extrinsic one: `p0` is given in frame
/// coordinates (`p0 eps_l = sum_k P0_kl epshat_k`) and is carried so that
/// its matrix in the parallel frames stays `P0`.
pub fn extend_to_extrinsic(normal_x: &ParallelFrame, normal_xhat: &ParallelFrame, p0: &DMatrix<f64>, sig: Signature, group: GroupChoice) -> Result<NormalExtension> {
    check_dim(normal_x.len(), normal_xhat.len())?;
    check_frame_map(p0, &normal_xhat.signs, &normal_x.signs, group)?;
    let n = sig.n();
    let p = (0..normal_x.len())
        .map(|k| {
            let mut out = DMatrix::zeros(n, n);
            for (l, eps) in normal_x.vectors[k].iter().enumerate() {
                let row = sig.left_mul(&DMatrix::from_column_slice(n, 1, eps.as_slice())).transpose() * normal_x.signs[l];
                for (kk, epshat) in normal_xhat.vectors[k].iter().enumerate() {
                    out += epshat * &row * p0[(kk, l)];
                }
            }
            out
        })
        .collect();
    Ok(NormalExtension { p, b0: diag(&normal_xhat.signs) * p0 })
}

/// Residuals of the geodesic test for a pair of curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicPairReport {
    /// Largest covariant acceleration along the first curve.
    pub acceleration: f64,
    pub acceleration_hat: f64,
    /// Largest `|<x', x'> - <xhat', xhat'>|`.
    pub speed_mismatch: f64,
}

impl GeodesicPairReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.acceleration <= tol && self.acceleration_hat <= tol && self.speed_mismatch <= tol
    }
}

/// Checks that both curves are geodesics with matching speeds.
pub fn geodesic_pair_check(geom: &dyn Geometry, x: &CurveSamples, geom_hat: &dyn Geometry, xhat: &CurveSamples) -> Result<GeodesicPairReport> {
    let sig = geom.signature();
    check_dim(x.len(), xhat.len())?;
    let accel = |g: &dyn Geometry, c: &CurveSamples| -> Result<f64> {
        let xdd = differentiate2(&c.times, &c.points)?;
        let mut worst: f64 = 0.0;
        for (p, a) in c.points.iter().zip(&xdd) {
            worst = worst.max(g.tangent_project(p, a)?.amax());
        }
        Ok(worst)
    };
    let v = differentiate(&x.times, &x.points)?;
    let vh = differentiate(&xhat.times, &xhat.points)?;
    let speed_mismatch = v.iter().zip(&vh).map(|(a, b)| (sig.dot(a, a) - sig.dot(b, b)).abs()).fold(0.0, f64::max);
    Ok(GeodesicPairReport { acceleration: accel(geom, x)?, acceleration_hat: accel(geom_hat, xhat)?, speed_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Control;
    use crate::diff::uniform_grid;
    use crate::hyperquadric::{AffineTangentSpace, Hyperquadric, HyperquadricSlice};
    use crate::indefinite::rotation;
    use crate::kinematics::{integrate_kinematics, integrate_kinematics_from, verify_rolling};
    use nalgebra::{dmatrix, dvector};

    const SQ2: f64 = std::f64::consts::SQRT_2;

    fn benchmark(ctrl: Control, t_end: f64) -> (RollingTrajectory, FrameSet, FrameSet) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0];
        let times = uniform_grid(0.0, t_end, 1e-3).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &ctrl, &times).unwrap();
        let (x, xhat) = curves(&traj);
        let plane = traj.affine_plane();
        let fx = FrameSet::along(&hq, &x, &[dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]], &[x0.clone()]).unwrap();
        let fh = FrameSet::along(&plane, &xhat, &[dvector![SQ2, 1.0, 0.0], dvector![1.0, SQ2, 0.0]], &[dvector![0.0, 0.0, 1.0]]).unwrap();
        (traj, fx, fh)
    }

    #[test]
    fn benchmark_configuration_matrices() {
        let ctrl = Control::closure(|t| dvector![t.cos(), (2.0 * t).sin(), 0.0]);
        let (traj, fx, fh) = benchmark(ctrl, 1.0);
        let cm = configuration_matrices(&traj, &fx, &fh, DEFAULT_PARALLEL_TOL).unwrap();
        let expected = dmatrix![-SQ2, 1.0; -1.0, SQ2];
        assert!((&cm.a - expected).amax() < 1e-6, "{}", cm.a);
        assert!((&cm.b - dmatrix![1.0]).amax() < 1e-6);
        assert!(cm.deviation < 1e-6, "{}", cm.deviation);
        let hatj = dmatrix![-1.0, 0.0; 0.0, 1.0];
        assert!((cm.a.transpose() * hatj * &cm.a - dmatrix![-1.0, 0.0; 0.0, 1.0]).amax() < 1e-6);
    }

    #[test]
    fn frame_errors() {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let times = uniform_grid(0.0, 0.5, 1e-2).unwrap();
        let curve = CurveSamples::from_fn(times.clone(), |t| dvector![t.sinh(), 0.0, t.cosh()]).unwrap();
        let bad = [dvector![1.0, 0.0, 0.0], dvector![0.0, 2.0, 0.0]];
        assert!(matches!(parallel_frame_along(&hq, &curve, &bad, TransportFlavor::Tangent), Err(Error::Frame(_))));
        let off = [dvector![1.0, 0.0, 0.0], dvector![0.0, 0.0, 1.0]];
        assert!(matches!(parallel_frame_along(&hq, &curve, &off, TransportFlavor::Tangent), Err(Error::Frame(_))));
        let short = [dvector![1.0, 0.0, 0.0]];
        assert!(matches!(parallel_frame_along(&hq, &curve, &short, TransportFlavor::Tangent), Err(Error::Frame(_))));

        let frame = ParallelFrame {
            times: times.clone(),
            vectors: times.iter().map(|t| vec![dvector![t.cosh(), 0.0, t.sinh()], dvector![0.0, t.cos(), 0.0]]).collect(),
            signs: vec![-1.0, 1.0],
            flavor: TransportFlavor::Tangent,
        };
        assert!(frame.parallel_residual(&hq, &curve).unwrap() > 0.1);
    }

    #[test]
    fn freedom_dimension_examples() {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let e0 = [dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]];
        let geo = CurveSamples::from_fn(times.clone(), |t| dvector![t.sinh(), 0.0, t.cosh()]).unwrap();
        let f = parallel_frame_along(&hq, &geo, &e0, TransportFlavor::Tangent).unwrap();
        assert_eq!(freedom_dimension(&hq, &geo, &f, DEFAULT_RANK_TOL).unwrap(), 1);
        let ad = adapted_frame(&hq, &geo, &f, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((ad.k, ad.xi), (1, 0));

        let x0 = dvector![0.0, 0.0, 1.0];
        let ctrl = Control::closure(|t| dvector![t.cos(), (2.0 * t).sin(), 0.0]);
        let traj = integrate_kinematics(&hq, &x0, &ctrl, &times).unwrap();
        let (x, xhat) = curves(&traj);
        let f = parallel_frame_along(&hq, &x, &e0, TransportFlavor::Tangent).unwrap();
        assert_eq!(freedom_dimension(&hq, &x, &f, DEFAULT_RANK_TOL).unwrap(), 0);
        let plane = traj.affine_plane();
        let fh = parallel_frame_along(&plane, &xhat, &e0, TransportFlavor::Tangent).unwrap();
        assert_eq!(freedom_dimension(&plane, &xhat, &fh, DEFAULT_RANK_TOL).unwrap(), 0);

        let null = CurveSamples::from_fn(times, |t| dvector![t, t, 1.0]).unwrap();
        let f = parallel_frame_along(&hq, &null, &e0, TransportFlavor::Tangent).unwrap();
        assert_eq!(freedom_dimension(&hq, &null, &f, DEFAULT_RANK_TOL).unwrap(), 1);
        assert!(matches!(adapted_frame(&hq, &null, &f, DEFAULT_RANK_TOL), Err(Error::Normalization { .. })));
    }

    #[test]
    fn small_freedom_leaves_a_unchanged() {
        let a = dmatrix![-SQ2, 1.0; -1.0, SQ2];
        let ad = AdaptedFrame { k: 1, xi: 0, change: DMatrix::identity(2, 2), signs: vec![1.0, -1.0] };
        assert_eq!(freedom_action(&a, &ad, &dmatrix![1.0], GroupChoice::IdentityComponent).unwrap(), a);
        assert!(freedom_action(&a, &ad, &dmatrix![-1.0], GroupChoice::IdentityComponent).is_err());
        let ad0 = AdaptedFrame { k: 0, xi: 0, change: DMatrix::identity(2, 2), signs: vec![-1.0, 1.0] };
        assert_eq!(freedom_action(&a, &ad0, &DMatrix::zeros(0, 0), GroupChoice::IdentityComponent).unwrap(), a);
    }

    #[test]
    fn freedom_gives_another_rolling() {
        let hq = Hyperquadric::lorentz_sphere(3).unwrap();
        let x0 = dvector![0.0, 0.0, 0.0, 1.0];
        let ctrl = Control::constant(dvector![1.0, 0.0, 0.0, 0.0]);
        let times = uniform_grid(0.0, 1.0, 1e-3).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &ctrl, &times).unwrap();
        let (x, xhat) = curves(&traj);
        let plane = traj.affine_plane();
        let basis = [dvector![1.0, 0.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0, 0.0], dvector![0.0, 0.0, 1.0, 0.0]];
        let fx = FrameSet::along(&hq, &x, &basis, &[x0.clone()]).unwrap();
        let fh = FrameSet::along(&plane, &xhat, &basis, &[x0.clone()]).unwrap();
        let cm = configuration_matrices(&traj, &fx, &fh, DEFAULT_PARALLEL_TOL).unwrap();
        assert!((&cm.a - DMatrix::from_diagonal(&dvector![-1.0, 1.0, 1.0])).amax() < 1e-8);

        let ad = adapted_frame(&hq, &x, &fx.tangent, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((ad.k, ad.xi), (2, 0));
        let a_prime = rotation(2, 0, 1, std::f64::consts::FRAC_PI_2);
        let a_new = freedom_action_in_frame(&cm.a, &ad, &a_prime, GroupChoice::IdentityComponent).unwrap();
        assert!((&a_new - &cm.a).amax() > 0.5);

        let g0 = freedom_rotation(&traj, &fx, &fh, &a_new).unwrap();
        let again = integrate_kinematics_from(&hq, &x0, &ctrl, &times, Some(&g0.inverse())).unwrap();
        let rep = verify_rolling(&again, 1e-6).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let (x2, xhat2) = curves(&again);
        for k in 0..times.len() {
            assert!((&x2.points[k] - &x.points[k]).amax() < 1e-10);
            assert!((&xhat2.points[k] - &xhat.points[k]).amax() < 1e-12);
        }
        let cm2 = configuration_matrices(&again, &fx, &fh, DEFAULT_PARALLEL_TOL).unwrap();
        assert!((&cm2.a - &a_new).amax() < 1e-8);
        assert!(cm2.deviation < 1e-8);
    }

    #[test]
    fn normal_extension_in_codimension_two() {
        let slice = HyperquadricSlice::new(Hyperquadric::lorentz_sphere(2).unwrap()).unwrap();
        let sig = slice.signature();
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let x = CurveSamples::from_fn(times.clone(), |t| slice.lift(&dvector![0.0, t.sin(), t.cos()])).unwrap();
        let x0 = x.points[0].clone();
        let plane = AffineTangentSpace::of(&slice, &x0).unwrap();
        let xhat = CurveSamples::from_fn(times, |t| dvector![0.0, t, 1.0, 0.0]).unwrap();
        let normals = [x0.clone(), dvector![0.0, 0.0, 0.0, 1.0]];
        let nx = parallel_frame_along(&slice, &x, &normals, TransportFlavor::Normal).unwrap();
        let nh = parallel_frame_along(&plane, &xhat, &normals, TransportFlavor::Normal).unwrap();
        assert!(nx.parallel_residual(&slice, &x).unwrap() < 1e-6);

        let p0 = rotation(2, 0, 1, 0.4);
        let ext = extend_to_extrinsic(&nx, &nh, &p0, sig, GroupChoice::IdentityComponent).unwrap();
        assert_eq!(ext.b0, p0);
        for (k, p) in ext.p.iter().enumerate() {
            let b = DMatrix::from_fn(2, 2, |i, j| sig.dot(&nh.vectors[k][i], &(p * &nx.vectors[k][j])));
            assert!((b - &ext.b0).amax() < 1e-10);
        }
        assert!(extend_to_extrinsic(&nx, &nh, &dmatrix![1.0, 0.0; 0.0, -1.0], sig, GroupChoice::IdentityComponent).is_err());
        assert!(extend_to_extrinsic(&nx, &nh, &dmatrix![2.0, 0.0; 0.0, 1.0], sig, GroupChoice::Full).is_err());
    }

    #[test]
    fn geodesic_pairs() {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0];
        let times = uniform_grid(0.0, 1.0, 1e-3).unwrap();
        let plane = AffineTangentSpace::new(&hq, &x0).unwrap();
        for u in [dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0], dvector![1.0, 1.0, 0.0]] {
            let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times).unwrap();
            let (x, xhat) = curves(&traj);
            let rep = geodesic_pair_check(&hq, &x, &plane, &xhat).unwrap();
            assert!(rep.passed(1e-5), "{rep:?}");
        }
        let ctrl = Control::closure(|t| dvector![t.cos(), (2.0 * t).sin(), 0.0]);
        let traj = integrate_kinematics(&hq, &x0, &ctrl, &times).unwrap();
        let (x, xhat) = curves(&traj);
        assert!(!geodesic_pair_check(&hq, &x, &plane, &xhat).unwrap().passed(1e-5));
    }
}
