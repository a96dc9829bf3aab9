//! Geodesic reachability by rolling on the Lorentz sphere `S^m_1`.
//!
//! A point `x1` is reached from `x0` along one geodesic iff
//! `<x0, x1>_J > -1` or `x1 = -x0`; the geodesic and the constant control
//! that rolls along it are constructed explicitly.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hyperquadric::{Geometry, Hyperquadric, MEMBERSHIP_TOL};
use crate::indefinite::indefinite_orthonormalize;

/// Width of the bands around `<x0, x1> = 1` (null) and `<x0, x1> = -1`
/// (no single geodesic).
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachabilityKind {
    TimelikeGeodesic,
    NullGeodesic,
    SpacelikeGeodesic,
    Antipodal,
    NotSingleGeodesic,
}

impl ReachabilityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TimelikeGeodesic => "timelike_geodesic",
            Self::NullGeodesic => "null_geodesic",
            Self::SpacelikeGeodesic => "spacelike_geodesic",
            Self::Antipodal => "antipodal",
            Self::NotSingleGeodesic => "not_single_geodesic",
        }
    }

    pub fn is_reachable(&self) -> bool {
        *self != Self::NotSingleGeodesic
    }
}

impl fmt::Display for ReachabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityResult {
    pub kind: ReachabilityKind,
    /// Initial velocity of the geodesic (also the constant rolling control).
    pub u: Option<DVector<f64>>,
    /// Arrival time.
    pub t1: Option<f64>,
    /// `<x0, x1>_J`
    pub inner: f64,
}

impl ReachabilityResult {
    /// Point reached at time `t` along the constructed geodesic.
    pub fn point_at(&self, x0: &DVector<f64>, t: f64) -> Option<DVector<f64>> {
        let u = self.u.as_ref()?;
        Some(match self.kind {
            ReachabilityKind::TimelikeGeodesic => x0 * t.cosh() + u * t.sinh(),
            ReachabilityKind::NullGeodesic => x0 + u * t,
            ReachabilityKind::SpacelikeGeodesic | ReachabilityKind::Antipodal => x0 * t.cos() + u * t.sin(),
            ReachabilityKind::NotSingleGeodesic => return None,
        })
    }

    /// Endpoint of the constructed geodesic.
    pub fn endpoint(&self, x0: &DVector<f64>) -> Option<DVector<f64>> {
        self.point_at(x0, self.t1?)
    }
}

fn check_lorentz_sphere(hq: &Hyperquadric) -> Result<()> {
    let sig = hq.signature();
    if sig.nu() != 1 || hq.level() != 1.0 {
        return Err(Error::Signature(format!(
            "reachability is defined on the Lorentz sphere (index 1, level 1), got index {} and level {}",
            sig.nu(),
            hq.level()
        )));
    }
    Ok(())
}

fn check_point(hq: &Hyperquadric, x: &DVector<f64>) -> Result<()> {
    check_dim(hq.signature().n(), x.len())?;
    let residual = hq.membership_residual(x);
    if residual.abs() > MEMBERSHIP_TOL * x.norm_squared().max(1.0) {
        return Err(Error::Membership { residual });
    }
    Ok(())
}

fn is_antipodal(x0: &DVector<f64>, x1: &DVector<f64>) -> bool {
    (x0 + x1).amax() <= 1e-9 * x0.amax().max(1.0)
}

/// Constructs the geodesic from `x0` to `x1` if there is one.
pub fn classify(hq: &Hyperquadric, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<ReachabilityResult> {
    check_lorentz_sphere(hq)?;
    check_point(hq, x0)?;
    check_point(hq, x1)?;
    if (x1 - x0).amax() <= 1e-12 * x0.amax().max(1.0) {
        return Err(Error::DegenerateTarget);
    }
    let sig = hq.signature();
    let inner = sig.dot(x0, x1);

    if is_antipodal(x0, x1) {
        return Ok(ReachabilityResult {
            kind: ReachabilityKind::Antipodal,
            u: Some(antipodal_direction(hq, x0)?),
            t1: Some(PI),
            inner,
        });
    }
    let (kind, u, t1) = if (inner - 1.0).abs() <= BOUNDARY_TOL {
        (ReachabilityKind::NullGeodesic, Some(x1 - x0), Some(1.0))
    } else if inner > 1.0 {
        let theta = inner.acosh();
        let u = (x1 - x0 * theta.cosh()) / theta.sinh();
        (ReachabilityKind::TimelikeGeodesic, Some(u), Some(theta))
    } else if inner > -1.0 + BOUNDARY_TOL {
        let theta = inner.acos();
        let u = (x1 - x0 * theta.cos()) / theta.sin();
        (ReachabilityKind::SpacelikeGeodesic, Some(u), Some(theta))
    } else {
        (ReachabilityKind::NotSingleGeodesic, None, None)
    };
    Ok(ReachabilityResult { kind, u, t1, inner })
}

/// Deterministic unit spacelike direction tangent at `x0`: the first
/// projected standard basis vector that is spacelike, normalized.
fn antipodal_direction(hq: &Hyperquadric, x0: &DVector<f64>) -> Result<DVector<f64>> {
    let sig = hq.signature();
    let candidates = hq.tangent_spanning_set(x0)?;
    for v in &candidates {
        let q = sig.dot(v, v);
        if q > 1e-6 * v.norm_squared() {
            return Ok(v / q.sqrt());
        }
    }
    let frame = indefinite_orthonormalize(&candidates, sig, 1e-12)?;
    frame
        .vectors
        .iter()
        .zip(&frame.signs)
        .find(|(_, s)| **s > 0.0)
        .map(|(v, _)| v.clone())
        .ok_or(Error::DegenerateSubspace)
}

/// Two-segment route through `-x1` for targets with `<x0, x1> <= -1`:
/// a causal geodesic from `x0` to `-x1` followed by the antipodal geodesic
/// from `-x1` to `x1`. Informational only.
pub fn broken_geodesic_suggestion(
    hq: &Hyperquadric,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
) -> Result<Option<(ReachabilityResult, ReachabilityResult)>> {
    let direct = classify(hq, x0, x1)?;
    if direct.kind.is_reachable() {
        return Ok(None);
    }
    let mirror: DVector<f64> = -x1;
    let first = classify(hq, x0, &mirror)?;
    let second = classify(hq, &mirror, x1)?;
    Ok(Some((first, second)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    OnAffineTangent,
    BeyondAffineTangent,
    BetweenPlanes,
    AtOrBeyondAntipodalPlane,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OnAffineTangent => "on_affine_tangent",
            Self::BeyondAffineTangent => "beyond_affine_tangent",
            Self::BetweenPlanes => "between_planes",
            Self::AtOrBeyondAntipodalPlane => "at_or_beyond_antipodal_plane",
        }
    }

    pub fn from_inner(inner: f64) -> Self {
        if (inner - 1.0).abs() <= BOUNDARY_TOL {
            Self::OnAffineTangent
        } else if inner > 1.0 {
            Self::BeyondAffineTangent
        } else if inner > -1.0 + BOUNDARY_TOL {
            Self::BetweenPlanes
        } else {
            Self::AtOrBeyondAntipodalPlane
        }
    }

    /// The region implied by a classification.
    pub fn of_kind(kind: ReachabilityKind) -> Self {
        match kind {
            ReachabilityKind::TimelikeGeodesic => Self::BeyondAffineTangent,
            ReachabilityKind::NullGeodesic => Self::OnAffineTangent,
            ReachabilityKind::SpacelikeGeodesic => Self::BetweenPlanes,
            ReachabilityKind::Antipodal | ReachabilityKind::NotSingleGeodesic => Self::AtOrBeyondAntipodalPlane,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position of `x1` relative to the affine tangent planes at `x0` and `-x0`.
pub fn hyperplane_test(hq: &Hyperquadric, x0: &DVector<f64>, x1: &DVector<f64>) -> Result<Region> {
    check_lorentz_sphere(hq)?;
    check_point(hq, x0)?;
    check_point(hq, x1)?;
    let inner = hq.signature().dot(x0, x1);
    if is_antipodal(x0, x1) {
        return Ok(Region::AtOrBeyondAntipodalPlane);
    }
    Ok(Region::from_inner(inner))
}

/// `(sinh a, cosh a sin b, cosh a cos b)` on `S^2_1`.
pub fn lorentz_sphere_point(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a.sinh(), a.cosh() * b.sin(), a.cosh() * b.cos()])
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPoint {
    pub a: f64,
    pub b: f64,
    pub x: DVector<f64>,
    pub inner: f64,
    pub kind: ReachabilityKind,
}

/// Classifies every grid point `(a, b)` of `S^2_1` relative to `x0`.
/// The grid point equal to `x0`, if any, is left out.
pub fn sample_partition(x0: &DVector<f64>, a_grid: &[f64], b_grid: &[f64]) -> Result<Vec<PartitionPoint>> {
    let hq = Hyperquadric::lorentz_sphere(2)?;
    check_point(&hq, x0)?;
    let pairs: Vec<(f64, f64)> = a_grid.iter().flat_map(|a| b_grid.iter().map(move |b| (*a, *b))).collect();
    let labelled = pairs
        .par_iter()
        .map(|&(a, b)| {
            let x = lorentz_sphere_point(a, b);
            match classify(&hq, x0, &x) {
                Ok(res) => Ok(Some(PartitionPoint { a, b, x, inner: res.inner, kind: res.kind })),
                Err(Error::DegenerateTarget) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(labelled.into_iter().flatten().collect())
}

/// `count` evenly spaced values covering `[lo, hi]` (inclusive).
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}
