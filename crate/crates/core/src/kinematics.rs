//! Kinematic equations of a hyperquadric rolling over its affine tangent
//! plane at `x0`:
//!
//! ```text
//! s'(t) = u(t)
//! R'(t) = R(t) (u(t) x0^t - x0 u(t)^t) J / r
//! ```
//!
//! with `x(t) = R(t) x0` the rolling curve and `xhat(t) = s(t) + x0` its
//! development.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::Control;
use crate::diff::differentiate;
use crate::error::{check_dim, Error, Result};
use crate::hyperquadric::{covariant_derivative, normal_derivative, AffineTangentSpace, CurveSamples, Geometry, Hyperquadric, MEMBERSHIP_TOL};
use crate::indefinite::{
    causal_class, group_residual, matrix_j_inner, orientation_component, AlgebraElement, CausalClass, GroupChoice,
    GroupElement, Signature, DEFAULT_NULL_TOL,
};

/// Relative tolerance for `<u(t), x0>_J = 0`.
pub const CONTROL_ORTHOGONALITY_TOL: f64 = 1e-9;

/// Default pass threshold for [`verify_rolling`].
pub const DEFAULT_VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RollingTrajectory {
    pub times: Vec<f64>,
    pub s: Vec<DVector<f64>>,
    pub r: Vec<DMatrix<f64>>,
    /// Control values at the grid times.
    pub u: Vec<DVector<f64>>,
    pub x0: DVector<f64>,
    pub hq: Hyperquadric,
}

impl RollingTrajectory {
    pub fn signature(&self) -> Signature {
        self.hq.signature()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `R(t_k)^{-1} = J R^t J`.
    pub fn r_inv(&self, k: usize) -> DMatrix<f64> {
        GroupElement::new_unchecked(self.r[k].clone(), self.signature()).inverse().into_matrix()
    }

    /// `max |R^t J R - J|` per sample.
    pub fn group_drift(&self) -> Vec<f64> {
        let sig = self.signature();
        self.r.iter().map(|r| group_residual(r, sig)).collect()
    }

    pub fn max_group_drift(&self) -> f64 {
        self.group_drift().into_iter().fold(0.0, f64::max)
    }

    pub fn affine_plane(&self) -> AffineTangentSpace {
        AffineTangentSpace::new(&self.hq, &self.x0).expect("x0 validated at integration")
    }
}

fn check_base_point(hq: &Hyperquadric, x0: &DVector<f64>) -> Result<()> {
    check_dim(hq.signature().n(), x0.len())?;
    let residual = hq.membership_residual(x0);
    if residual.abs() > MEMBERSHIP_TOL * x0.norm_squared().max(1.0) {
        return Err(Error::Membership { residual });
    }
    Ok(())
}

fn control_at(ctrl: &Control, t: f64, x0: &DVector<f64>, sig: Signature) -> Result<DVector<f64>> {
    let u = ctrl.eval(t);
    check_dim(sig.n(), u.len())?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("control is not finite at t = {t}")));
    }
    let residual = sig.dot(&u, x0);
    if residual.abs() > CONTROL_ORTHOGONALITY_TOL * (u.norm() * x0.norm()).max(1.0) {
        return Err(Error::Orthogonality { residual });
    }
    Ok(u)
}

/// Integrates the kinematic equations from `s(0) = 0`, `R(0) = I`.
///
/// Each step is `R_{k+1} = R_k exp(h Omega(t_mid))` and
/// `s_{k+1} = s_k + h u(t_mid)`, exact for constant controls.
pub fn integrate_kinematics(hq: &Hyperquadric, x0: &DVector<f64>, ctrl: &Control, times: &[f64]) -> Result<RollingTrajectory> {
    integrate_kinematics_from(hq, x0, ctrl, times, None)
}

/// As [`integrate_kinematics`] but starting from `R(0) = r0`, which must
/// fix `x0`.
pub fn integrate_kinematics_from(
    hq: &Hyperquadric,
    x0: &DVector<f64>,
    ctrl: &Control,
    times: &[f64],
    r0: Option<&GroupElement>,
) -> Result<RollingTrajectory> {
    let sig = hq.signature();
    let n = sig.n();
    check_base_point(hq, x0)?;
    crate::diff::validate_grid(times, 1)?;
    let start = match r0 {
        Some(g) => {
            check_dim(n, g.matrix().nrows())?;
            let moved = g.act(x0) - x0;
            if moved.amax() > 1e-9 * x0.amax().max(1.0) {
                return Err(Error::Frame("initial rotation must fix the base point".into()));
            }
            g.matrix().clone()
        }
        None => DMatrix::identity(n, n),
    };
    let level = hq.level();
    let mut s = vec![DVector::zeros(n)];
    let mut r = vec![start];
    let mut u = vec![control_at(ctrl, times[0], x0, sig)?];
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let um = control_at(ctrl, 0.5 * (w[0] + w[1]), x0, sig)?;
        let step = wedge_exp(&um, x0, sig, level, h);
        let next_r = restore_group(r.last().expect("non-empty") * step, sig);
        let next_s = s.last().expect("non-empty") + um * h;
        r.push(next_r);
        s.push(next_s);
        u.push(control_at(ctrl, w[1], x0, sig)?);
    }
    Ok(RollingTrajectory { times: times.to_vec(), s, r, u, x0: x0.clone(), hq: *hq })
}

/// `exp(h (u x0^t - x0 u^t) J / r)` for `u` tangent at `x0`, where `r` is
/// the level of the base point.
///
/// The generator `W` satisfies `W^3 = -k W` with `k = <u, u> / r`, so the
/// exponential is `I + f1 W + f2 W^2`. A generic `expm` loses accuracy here
/// because `W` is far from normal whenever `x0` is far from the origin.
fn wedge_exp(u: &DVector<f64>, x0: &DVector<f64>, sig: Signature, level: f64, h: f64) -> DMatrix<f64> {
    let n = x0.len();
    let u = u - x0 * (sig.dot(u, x0) / level);
    let w = AlgebraElement::wedge(&u, x0, sig, level).matrix() * h;
    let k = sig.dot(&u, &u) / level * h * h;
    let (f1, f2) = if k.abs() < 1e-8 {
        (1.0 - k / 6.0, 0.5 - k / 24.0)
    } else if k > 0.0 {
        let th = k.sqrt();
        (th.sin() / th, 2.0 * (0.5 * th).sin().powi(2) / k)
    } else {
        let th = (-k).sqrt();
        (th.sinh() / th, 2.0 * (0.5 * th).sinh().powi(2) / -k)
    };
    let w2 = &w * &w;
    DMatrix::identity(n, n) + w * f1 + w2 * f2
}

/// First-order Newton correction `R (3I - R^J R) / 2` towards `O_nu(n)`.
///
/// The correction moves `R` by about `|R| |D|` with `D = R^J R - I`, while
/// the error it removes is only about `|D| / |R|`. Once `R` is a large boost
/// the correction does more harm than good, so it is applied only while
/// `|R| |R^J|` stays below [`RESTORE_MAX_SPREAD`]; the steps themselves are
/// exact on the group.
fn restore_group(r: DMatrix<f64>, sig: Signature) -> DMatrix<f64> {
    let n = r.nrows();
    let rj = GroupElement::new_unchecked(r.clone(), sig).inverse().into_matrix();
    if rj.amax() * r.amax() > RESTORE_MAX_SPREAD {
        return r;
    }
    let defect = rj * &r - DMatrix::identity(n, n);
    &r - (&r * defect) * 0.5
}

const RESTORE_MAX_SPREAD: f64 = 1e4;

/// Rolling curve `x = R x0` and development `xhat = s + x0`.
pub fn curves(traj: &RollingTrajectory) -> (CurveSamples, CurveSamples) {
    let x = traj.r.iter().map(|r| r * &traj.x0).collect();
    let xhat = traj.s.iter().map(|s| s + &traj.x0).collect();
    (
        CurveSamples { times: traj.times.clone(), points: x },
        CurveSamples { times: traj.times.clone(), points: xhat },
    )
}

/// Max residual per rolling condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// (i) `x` on the hyperquadric and `xhat` on the affine plane.
    pub membership: f64,
    /// (ii) `|<R^{-1} v, x0>|` for tangent `v` at `x`.
    pub tangency: f64,
    /// (iii) 1 if some `R(t)^{-1}` leaves the chosen group `G`, else 0.
    pub orientation: f64,
    /// (iv) `|xhat' - R^{-1} x'|`.
    pub no_slip: f64,
    /// (v) `|R^{-1} DZ/dt - D/dt (R^{-1} Z)|` on test fields.
    pub tangent_twist: f64,
    /// (vi) the normal counterpart of (v).
    pub normal_twist: f64,
    pub tol: f64,
}

impl VerificationReport {
    pub fn residuals(&self) -> [(&'static str, f64); 6] {
        [
            ("membership", self.membership),
            ("tangency", self.tangency),
            ("orientation", self.orientation),
            ("no_slip", self.no_slip),
            ("tangent_twist", self.tangent_twist),
            ("normal_twist", self.normal_twist),
        ]
    }

    pub fn passed(&self) -> bool {
        self.residuals().iter().all(|(_, r)| *r <= self.tol)
    }
}

fn max_amax<'a>(it: impl Iterator<Item = &'a DVector<f64>>) -> f64 {
    it.map(|v| v.amax()).fold(0.0, f64::max)
}

/// Checks the six rolling conditions with `G` the identity component.
pub fn verify_rolling(traj: &RollingTrajectory, tol: f64) -> Result<VerificationReport> {
    verify_rolling_with(traj, tol, GroupChoice::IdentityComponent)
}

pub fn verify_rolling_with(traj: &RollingTrajectory, tol: f64, group: GroupChoice) -> Result<VerificationReport> {
    let sig = traj.signature();
    let n = sig.n();
    let hq = &traj.hq;
    let plane = traj.affine_plane();
    let (x, xhat) = curves(traj);
    let r_inv: Vec<DMatrix<f64>> = (0..traj.len()).map(|k| traj.r_inv(k)).collect();

    let membership = x
        .points
        .iter()
        .map(|p| hq.membership_residual(p).abs())
        .chain(xhat.points.iter().map(|p| plane.membership_residual(p).abs()))
        .fold(0.0, f64::max);

    let tangency = (0..traj.len())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let basis = hq.tangent_spanning_set(&x.points[k])?;
            Ok(basis.iter().map(|v| sig.dot(&(&r_inv[k] * v), &traj.x0).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let orientation = if r_inv.iter().all(|m| {
        orientation_component(&GroupElement::new_unchecked(m.clone(), sig)).is_ok_and(|c| group.contains(c))
    }) {
        0.0
    } else {
        1.0
    };

    if traj.len() < 3 {
        return Ok(VerificationReport { membership, tangency, orientation, no_slip: 0.0, tangent_twist: 0.0, normal_twist: 0.0, tol });
    }

    let xdot = x.velocities()?;
    let xhat_dot = xhat.velocities()?;
    let no_slip = max_amax(xhat_dot.iter().zip(&xdot).zip(&r_inv).map(|((a, b), ri)| a - ri * b).collect::<Vec<_>>().iter());

    // (v): Z_k(t) = P_{x(t)}(b_k) for the standard basis b_k.
    let tangent_twist = (0..n)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let b = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
            let z: Vec<DVector<f64>> = x.points.iter().map(|p| hq.tangent_project(p, &b)).collect::<Result<_>>()?;
            let dz = covariant_derivative(hq, &x, &z)?;
            let pulled: Vec<DVector<f64>> = z.iter().zip(&r_inv).map(|(v, ri)| ri * v).collect();
            let d_pulled = covariant_derivative(&plane, &xhat, &pulled)?;
            Ok(max_amax(dz.iter().zip(&r_inv).zip(&d_pulled).map(|((d, ri), dp)| ri * d - dp).collect::<Vec<_>>().iter()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    // (vi): Psi(t) = (1 + t) x(t).
    let psi: Vec<DVector<f64>> = x.points.iter().zip(&x.times).map(|(p, t)| p * (1.0 + t)).collect();
    let dpsi = normal_derivative(hq, &x, &psi)?;
    let pulled: Vec<DVector<f64>> = psi.iter().zip(&r_inv).map(|(v, ri)| ri * v).collect();
    let d_pulled = normal_derivative(&plane, &xhat, &pulled)?;
    let normal_twist = max_amax(dpsi.iter().zip(&r_inv).zip(&d_pulled).map(|((d, ri), dp)| ri * d - dp).collect::<Vec<_>>().iter());

    Ok(VerificationReport { membership, tangency, orientation, no_slip, tangent_twist, normal_twist, tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportFlavor {
    Tangent,
    Normal,
}

/// Parallel field `Y(t) = R(t) Y0` along the rolling curve.
pub fn parallel_transport(traj: &RollingTrajectory, y0: &DVector<f64>, flavor: TransportFlavor) -> Result<Vec<DVector<f64>>> {
    let sig = traj.signature();
    check_dim(sig.n(), y0.len())?;
    let tangent = traj.hq.tangent_project(&traj.x0, y0)?;
    let scale = 1e-9 * y0.amax().max(1.0);
    match flavor {
        TransportFlavor::Tangent if (y0 - &tangent).amax() > scale => {
            return Err(Error::Flavor("tangent transport needs <Y0, x0> = 0".into()))
        }
        TransportFlavor::Normal if tangent.amax() > scale => {
            return Err(Error::Flavor("normal transport needs Y0 proportional to x0".into()))
        }
        _ => {}
    }
    Ok(traj.r.iter().map(|r| r * y0).collect())
}

/// Causal data at one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalSample {
    pub t: f64,
    /// `<x', x'>_J`
    pub xdot_sq: f64,
    /// `<xhat', xhat'>_J`
    pub xhat_dot_sq: f64,
    /// `<u, u>_J`
    pub u_sq: f64,
    /// `<<R', R'>>_J`
    pub rdot_sq: f64,
    pub class: CausalClass,
}

impl CausalSample {
    /// Largest deviation from `<x',x'> = <xhat',xhat'> = <u,u>` and
    /// `<<R',R'>> = 2 <u,u> / r`.
    pub fn mismatch(&self, level: f64) -> f64 {
        [
            (self.xdot_sq - self.u_sq).abs(),
            (self.xhat_dot_sq - self.u_sq).abs(),
            (self.rdot_sq - 2.0 * self.u_sq / level).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Squared speeds of `x`, `xhat`, `u` and `R` per sample; derivatives by
/// finite differences of the integrated trajectory.
pub fn causal_report(traj: &RollingTrajectory) -> Result<Vec<CausalSample>> {
    let sig = traj.signature();
    let (x, xhat) = curves(traj);
    let xdot = x.velocities()?;
    let xhat_dot = xhat.velocities()?;
    let rdot = differentiate(&traj.times, &traj.r)?;
    (0..traj.len())
        .map(|k| {
            let u_sq = sig.dot(&traj.u[k], &traj.u[k]);
            Ok(CausalSample {
                t: traj.times[k],
                xdot_sq: sig.dot(&xdot[k], &xdot[k]),
                xhat_dot_sq: sig.dot(&xhat_dot[k], &xhat_dot[k]),
                u_sq,
                rdot_sq: matrix_j_inner(&rdot[k], &rdot[k], sig)?,
                class: causal_class(&traj.u[k], sig, DEFAULT_NULL_TOL),
            })
        })
        .collect()
}
