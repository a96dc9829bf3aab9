//! Built-in sanity cases with exact or obvious answers.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use pseudoroll::control::Control;
use pseudoroll::diff::uniform_grid;
use pseudoroll::distribution::{
    causal_trace, christoffel, lift, ChartPair, EmbeddedChart, MetricChart, TrivializedCurve, causal_trace_formula,
    horizontality_residual,
};
use pseudoroll::hyperquadric::{covariant_derivative, normal_derivative, AffineTangentSpace, CurveSamples, Geometry, Hyperquadric};
use pseudoroll::indefinite::{
    causal_class, commutator_w, expm, indefinite_orthonormalize, is_group_element, j_adjoint, j_inner, left_right_convert, lie_basis,
    matrix_j_inner, orientation_component, CausalClass, GroupChoice, GroupElement, OrientationComponent, Signature,
};
use pseudoroll::intrinsic::{
    configuration_matrices, extend_to_extrinsic, freedom_action, geodesic_pair_check, parallel_frame_along, AdaptedFrame, FrameSet,
};
use pseudoroll::kinematics::{causal_report, curves, integrate_kinematics, verify_rolling, TransportFlavor};
use pseudoroll::reachability::sample_partition;

use crate::commands::Outcome;

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn r3() -> Signature {
    Signature::lorentzian(3).expect("valid")
}

fn e(i: usize, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}

fn stationary() -> Result<pseudoroll::kinematics::RollingTrajectory, String> {
    let hq = Hyperquadric::lorentz_sphere(2).map_err(|e| e.to_string())?;
    let times = uniform_grid(0.0, 1.0, 0.01).map_err(|e| e.to_string())?;
    integrate_kinematics(&hq, &dvector![0.0, 0.0, 1.0], &Control::constant(DVector::zeros(3)), &times).map_err(|e| e.to_string())
}

fn s(e: impl ToString) -> String {
    e.to_string()
}

/// Every case: name and check.
pub fn cases() -> Vec<(&'static str, Check)> {
    vec![
        ("j_inner of the timelike axis is -1", || {
            let v = j_inner(&e(0, 3), &e(0, 3), r3()).map_err(s)?;
            ensure(v == -1.0, || format!("got {v}"))
        }),
        ("(1,1,0) is null", || {
            let c = causal_class(&dvector![1.0, 1.0, 0.0], r3(), 1e-9);
            ensure(c == CausalClass::Null, || format!("got {c:?}"))
        }),
        ("(0,1,0) is spacelike", || {
            let c = causal_class(&e(1, 3), r3(), 1e-9);
            ensure(c == CausalClass::Spacelike, || format!("got {c:?}"))
        }),
        ("identity is J-self-adjoint", || {
            let a = j_adjoint(&DMatrix::identity(3, 3), r3()).map_err(s)?;
            ensure(a == DMatrix::identity(3, 3), || format!("got {a}"))
        }),
        ("identity is a group element", || ensure(is_group_element(&DMatrix::identity(3, 3), r3(), 1e-12), || "rejected".into())),
        ("<<0, B>> = 0", || {
            let v = matrix_j_inner(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3), r3()).map_err(s)?;
            ensure(v == 0.0, || format!("got {v}"))
        }),
        ("identity lies in the identity component", || {
            let c = orientation_component(&GroupElement::identity(r3())).map_err(s)?;
            ensure(c == OrientationComponent::PP, || format!("got {c:?}"))
        }),
        ("exp(0) = I", || {
            let m = expm(&DMatrix::zeros(4, 4));
            ensure(m == DMatrix::identity(4, 4), || format!("got {m}"))
        }),
        ("Euclidean basis element is E_01 - E_10", || {
            let w = lie_basis(0, 1, Signature::euclidean(3).map_err(s)?).map_err(s)?;
            let want = dmatrix![0.0, 1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, 0.0];
            ensure(*w.matrix() == want, || format!("got {}", w.matrix()))
        }),
        ("[W_01, W_01] = 0", || {
            let c = commutator_w(0, 1, 0, 1, r3()).map_err(s)?;
            ensure(c.amax() == 0.0, || format!("got {c}"))
        }),
        ("left and right coefficients agree at the identity", || {
            let c = left_right_convert(&GroupElement::identity(r3()), 0, 2).map_err(s)?;
            for ((r, q), v) in c.iter() {
                let want = if (r, q) == (0, 2) { 1.0 } else { 0.0 };
                ensure((v - want).abs() <= 1e-15, || format!("c[{r},{q}] = {v}"))?;
            }
            Ok(())
        }),
        ("standard basis is already orthonormal", || {
            let basis: Vec<_> = (0..3).map(|i| e(i, 3)).collect();
            let f = indefinite_orthonormalize(&basis, r3(), 1e-12).map_err(s)?;
            ensure(f.vectors == basis, || format!("got {:?}", f.vectors))
        }),
        ("(0,0,2) is off S^2_1", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            ensure(!hq.contains(&dvector![0.0, 0.0, 2.0], 1e-9), || "accepted".into())
        }),
        ("tangent projection fixes tangent vectors", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let v = dvector![0.3, -1.2, 0.0];
            let p = hq.tangent_project(&e(2, 3), &v).map_err(s)?;
            ensure((p - v).amax() == 0.0, || "moved".into())
        }),
        ("tangent projection kills the normal", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let p = hq.tangent_project(&e(2, 3), &e(2, 3)).map_err(s)?;
            ensure(p.amax() == 0.0, || format!("got {p}"))
        }),
        ("constant fields on an affine plane are parallel", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let plane = AffineTangentSpace::new(&hq, &e(2, 3)).map_err(s)?;
            let times = uniform_grid(0.0, 1.0, 0.1).map_err(s)?;
            let curve = CurveSamples::from_fn(times.clone(), |t| dvector![t, 0.5 * t, 1.0]).map_err(s)?;
            let tangent = vec![dvector![1.0, 2.0, 0.0]; times.len()];
            let normal = vec![e(2, 3); times.len()];
            let d = covariant_derivative(&plane, &curve, &tangent).map_err(s)?;
            let dn = normal_derivative(&plane, &curve, &normal).map_err(s)?;
            let worst = d.iter().chain(&dn).map(|v| v.amax()).fold(0.0, f64::max);
            ensure(worst <= 1e-12, || format!("got {worst:e}"))
        }),
        ("zero control gives the stationary rolling", || {
            let traj = stationary()?;
            let (x, xhat) = curves(&traj);
            let x0 = e(2, 3);
            for k in 0..traj.len() {
                ensure(traj.s[k].amax() == 0.0 && traj.r[k] == DMatrix::identity(3, 3), || format!("moved at sample {k}"))?;
                ensure(x.points[k] == x0 && xhat.points[k] == x0, || format!("curves moved at sample {k}"))?;
            }
            Ok(())
        }),
        ("stationary rolling has zero residuals", || {
            let r = verify_rolling(&stationary()?, 1e-12).map_err(s)?;
            ensure(r.residuals().iter().all(|(_, v)| *v == 0.0), || format!("{:?}", r.residuals()))
        }),
        ("null control stays null", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let times = uniform_grid(0.0, 1.0, 1e-3).map_err(s)?;
            let u = dvector![1.0, 1.0, 0.0] / 2f64.sqrt();
            let traj = integrate_kinematics(&hq, &e(2, 3), &Control::constant(u), &times).map_err(s)?;
            let rep = causal_report(&traj).map_err(s)?;
            let worst = rep.iter().map(|c| c.xdot_sq.abs().max(c.rdot_sq.abs())).fold(0.0, f64::max);
            ensure(worst <= 1e-9, || format!("got {worst:e}"))
        }),
        ("partition skips x0 itself", || {
            let pts = sample_partition(&e(2, 3), &[0.0], &[0.0, 1.0]).map_err(s)?;
            ensure(pts.len() == 1 && pts[0].b == 1.0, || format!("got {} points", pts.len()))
        }),
        ("constant curve has a constant parallel frame", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let curve = CurveSamples::from_fn(uniform_grid(0.0, 1.0, 0.1).map_err(s)?, |_| e(2, 3)).map_err(s)?;
            let f = parallel_frame_along(&hq, &curve, &[e(0, 3), e(1, 3)], TransportFlavor::Tangent).map_err(s)?;
            let worst = f.vectors.iter().flat_map(|v| v.iter().zip([e(0, 3), e(1, 3)]).map(|(a, b)| (a - b).amax())).fold(0.0, f64::max);
            ensure(worst <= 1e-15, || format!("got {worst:e}"))
        }),
        ("identical frames under the stationary rolling give A = I", || {
            let traj = stationary()?;
            let (x, xhat) = curves(&traj);
            let plane = traj.affine_plane();
            let tan = [e(0, 3), e(1, 3)];
            let nrm = [e(2, 3)];
            let fx = FrameSet::along(&traj.hq, &x, &tan, &nrm).map_err(s)?;
            let fh = FrameSet::along(&plane, &xhat, &tan, &nrm).map_err(s)?;
            let cm = configuration_matrices(&traj, &fx, &fh, 1e-6).map_err(s)?;
            // A_ij = <ehat_i, e_j> = J_ij for matching frames.
            let want = DMatrix::from_diagonal(&dvector![-1.0, 1.0]);
            ensure((&cm.a - want).amax() <= 1e-15 && (cm.b[(0, 0)] - 1.0).abs() <= 1e-15, || format!("A = {}, B = {}", cm.a, cm.b))
        }),
        ("A' = I acts trivially", || {
            let a = dmatrix![-(2f64.sqrt()), 1.0; -1.0, 2f64.sqrt()];
            let adapted = AdaptedFrame { k: 1, xi: 0, change: DMatrix::identity(2, 2), signs: vec![1.0, -1.0] };
            let out = freedom_action(&a, &adapted, &DMatrix::identity(1, 1), GroupChoice::IdentityComponent).map_err(s)?;
            ensure((out - a).amax() <= 1e-15, || "changed".into())
        }),
        ("P0 = I maps normal frame to normal frame", || {
            let traj = stationary()?;
            let (x, xhat) = curves(&traj);
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let plane = traj.affine_plane();
            let nx = parallel_frame_along(&hq, &x, &[e(2, 3)], TransportFlavor::Normal).map_err(s)?;
            let nh = parallel_frame_along(&plane, &xhat, &[e(2, 3)], TransportFlavor::Normal).map_err(s)?;
            let ext = extend_to_extrinsic(&nx, &nh, &DMatrix::identity(1, 1), r3(), GroupChoice::IdentityComponent).map_err(s)?;
            for (k, p) in ext.p.iter().enumerate() {
                let img = p * &nx.vectors[k][0];
                ensure((img - &nh.vectors[k][0]).amax() <= 1e-12, || format!("sample {k}"))?;
            }
            Ok(())
        }),
        ("constant curves are a geodesic pair", || {
            let hq = Hyperquadric::lorentz_sphere(2).map_err(s)?;
            let plane = AffineTangentSpace::new(&hq, &e(2, 3)).map_err(s)?;
            let c = CurveSamples::from_fn(uniform_grid(0.0, 1.0, 0.1).map_err(s)?, |_| e(2, 3)).map_err(s)?;
            let rep = geodesic_pair_check(&hq, &c, &plane, &c).map_err(s)?;
            ensure(rep.passed(1e-12), || format!("{rep:?}"))
        }),
        ("flat metrics have no Christoffel symbols", || {
            for c in [1.0, 3.5] {
                let chart = MetricChart::new(2, 1, move |_| DMatrix::from_diagonal(&dvector![-c, c])).map_err(s)?;
                let g = christoffel(&chart, &dvector![0.4, -0.2]).map_err(s)?;
                let worst = g.max_abs_diff(&pseudoroll::distribution::Christoffel::zeros(2));
                ensure(worst <= 1e-12, || format!("c = {c}: {worst:e}"))?;
            }
            Ok(())
        }),
        ("lift of zero is zero", || {
            let pair = ChartPair::lorentz_sphere_over_plane(&e(2, 3)).map_err(s)?;
            let a = DMatrix::from_diagonal(&dvector![-1.0, 1.0]);
            let l = lift(&pair, &dvector![0.2, 0.1], &dvector![0.0, 0.0], &a, &DMatrix::identity(1, 1), &DVector::zeros(2)).map_err(s)?;
            ensure(l.w.amax() == 0.0 && l.a_dot.amax() == 0.0 && l.xhat_dot.amax() == 0.0, || format!("w = {}", l.w))
        }),
        ("stationary trivialized curve is horizontal", || {
            let pair = ChartPair::lorentz_sphere_over_plane(&e(2, 3)).map_err(s)?;
            let curve = constant_curve()?;
            let r = horizontality_residual(&curve, &pair).map_err(s)?;
            let worst = r.iter().copied().fold(0.0, f64::max);
            ensure(worst <= 1e-12, || format!("got {worst:e}"))
        }),
        ("constant A has zero causal trace, spacelike", || {
            let curve = constant_curve()?;
            let tr = causal_trace(&curve.times, &curve.a, Signature::new(2, 1).map_err(s)?).map_err(s)?;
            ensure(tr.iter().all(|c| c.value.abs() <= 1e-12 && c.class == CausalClass::Spacelike), || format!("{:?}", tr[0]))
        }),
        ("flat over flat gives zero formula", || {
            let sig = r3();
            let plane = |base: DVector<f64>| EmbeddedChart::affine(sig, base, vec![e(0, 3), e(1, 3)], vec![e(2, 3)]);
            let pair = ChartPair { chart: plane(e(2, 3)).map_err(s)?, chart_hat: plane(e(2, 3)).map_err(s)? };
            let times = uniform_grid(0.0, 1.0, 0.05).map_err(s)?;
            let n = times.len();
            let x: Vec<_> = times.iter().map(|&t| dvector![0.5 * t, t]).collect();
            let a = vec![DMatrix::from_diagonal(&dvector![-1.0, 1.0]); n];
            let b = vec![DMatrix::identity(1, 1); n];
            let curve = TrivializedCurve::new(times, x.clone(), x, a, b, Signature::new(2, 1).map_err(s)?, Signature::euclidean(1).map_err(s)?)
                .map_err(s)?;
            let f = causal_trace_formula(&curve, &pair).map_err(s)?;
            ensure(f.iter().all(|c| c.tangent.abs() <= 1e-12 && c.normal.abs() <= 1e-12), || format!("{:?}", f[0]))
        }),
    ]
}

fn constant_curve() -> Result<TrivializedCurve, String> {
    let times = uniform_grid(0.0, 1.0, 0.05).map_err(s)?;
    let n = times.len();
    TrivializedCurve::new(
        times,
        vec![dvector![0.0, 0.0]; n],
        vec![dvector![0.0, 0.0]; n],
        vec![DMatrix::from_diagonal(&dvector![-1.0, 1.0]); n],
        vec![DMatrix::identity(1, 1); n],
        Signature::new(2, 1).map_err(s)?,
        Signature::euclidean(1).map_err(s)?,
    )
    .map_err(s)
}

/// Runs every case, one summary line each.
pub fn run() -> Outcome {
    let mut passed = true;
    let mut summary = Vec::new();
    for (name, check) in cases() {
        match check() {
            Ok(()) => summary.push(format!("ok    {name}")),
            Err(msg) => {
                passed = false;
                summary.push(format!("FAIL  {name}: {msg}"));
            }
        }
    }
    Outcome { passed, summary, files: Vec::new() }
}
