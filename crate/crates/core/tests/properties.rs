use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;

use pseudoroll::control::Control;
use pseudoroll::diff::uniform_grid;
use pseudoroll::distribution::{causal_trace, horizontality_residual, lift, trivialize_rolling, ChartPair, TrivializedCurve};
use pseudoroll::expr::{BinOp, Expr, Func};
use pseudoroll::hyperquadric::{Geometry, Hyperquadric};
use pseudoroll::indefinite::{
    algebra_residual, boost, commutator_w, commutator_w_exact, expm, group_residual, indefinite_orthonormalize, j_adjoint, j_inner,
    lie_basis, orientation_component, GroupElement, Signature,
};
use pseudoroll::kinematics::{integrate_kinematics, parallel_transport, TransportFlavor};
use pseudoroll::reachability::lorentz_sphere_point;

fn signature() -> impl Strategy<Value = Signature> {
    (2usize..=5).prop_flat_map(|n| (Just(n), 0..=n)).prop_map(|(n, nu)| Signature::new(n, nu).unwrap())
}

/// Algebra element from coefficients on the `W_ij` basis.
fn algebra_element(sig: Signature, coeffs: &[f64]) -> DMatrix<f64> {
    let n = sig.n();
    let mut m = DMatrix::zeros(n, n);
    let mut c = coeffs.iter().cycle();
    for i in 0..n {
        for j in i + 1..n {
            m += lie_basis(i, j, sig).unwrap().matrix() * *c.next().unwrap();
        }
    }
    m
}

fn sig_and_coeffs(scale: f64) -> impl Strategy<Value = (Signature, Vec<f64>)> {
    (signature(), prop::collection::vec(-scale..scale, 15))
}

fn sig_and_matrix() -> impl Strategy<Value = (Signature, DMatrix<f64>)> {
    signature().prop_flat_map(|sig| {
        let n = sig.n();
        (Just(sig), prop::collection::vec(-3.0..3.0f64, n * n)).prop_map(move |(s, v)| (s, DMatrix::from_vec(n, n, v)))
    })
}

fn s12_point() -> impl Strategy<Value = DVector<f64>> {
    (-1.5..1.5f64, -3.0..3.0f64).prop_map(|(a, b)| lorentz_sphere_point(a, b))
}

fn vec3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, 3).prop_map(DVector::from_vec)
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0.0..100.0f64).prop_map(Expr::Num), Just(Expr::T)];
    leaf.prop_recursive(5, 32, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let func = prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Sinh), Just(Func::Cosh)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
            (func, inner).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
        ]
    })
}

fn same_value(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b
}

proptest! {
    #[test]
    fn exp_of_algebra_is_in_group((sig, c) in sig_and_coeffs(1.0)) {
        let w = algebra_element(sig, &c);
        prop_assert!(algebra_residual(&w, sig) <= 1e-15);
        let g = expm(&w);
        let scale = g.amax().powi(2);
        prop_assert!(group_residual(&g, sig) <= 1e-12 * scale, "residual {}", group_residual(&g, sig));
    }

    #[test]
    fn j_adjoint_is_an_involution((sig, a) in sig_and_matrix()) {
        let back = j_adjoint(&j_adjoint(&a, sig).unwrap(), sig).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn orientation_is_a_homomorphism(
        (sig, c1, c2) in (signature(), prop::collection::vec(-0.8..0.8f64, 15), prop::collection::vec(-0.8..0.8f64, 15)),
        flips in prop::collection::vec(any::<bool>(), 10),
    ) {
        let n = sig.n();
        let reflect = |k: usize| DMatrix::from_fn(n, n, |i, j| if i != j { 0.0 } else if flips[(i + k) % flips.len()] { -1.0 } else { 1.0 });
        let g = GroupElement::new(expm(&algebra_element(sig, &c1)) * reflect(0), sig, 1e-9).unwrap();
        let h = GroupElement::new(reflect(3) * expm(&algebra_element(sig, &c2)), sig, 1e-9).unwrap();
        let og = orientation_component(&g).unwrap();
        let oh = orientation_component(&h).unwrap();
        let ogh = orientation_component(&g.compose(&h)).unwrap();
        prop_assert_eq!(ogh, og.compose(&oh));
    }

    #[test]
    fn commutators_close_in_the_algebra(sig in signature(), idx in prop::collection::vec(0usize..100, 4)) {
        let n = sig.n();
        let pair = |a: usize, b: usize| {
            let i = a % n;
            let j = (i + 1 + b % (n - 1)) % n;
            (i.min(j), i.max(j))
        };
        let ((i, j), (k, l)) = (pair(idx[0], idx[1]), pair(idx[2], idx[3]));
        let c = commutator_w(i, j, k, l, sig).unwrap();
        prop_assert_eq!(algebra_residual(&c, sig), 0.0);
        let wij = lie_basis(i, j, sig).unwrap().matrix().clone();
        let wkl = lie_basis(k, l, sig).unwrap().matrix().clone();
        prop_assert_eq!(&wij * &wkl - &wkl * &wij, commutator_w_exact(i, j, k, l, sig).unwrap().map(|v| v as f64));
    }

    #[test]
    fn tangent_projection_is_idempotent_and_self_adjoint(x in s12_point(), v in vec3(), w in vec3()) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let sig = hq.signature();
        let pv = hq.tangent_project(&x, &v).unwrap();
        let ppv = hq.tangent_project(&x, &pv).unwrap();
        let scale = x.norm_squared() * v.norm().max(1.0);
        prop_assert!((&ppv - &pv).amax() <= 1e-12 * scale);
        prop_assert!(j_inner(&pv, &x, sig).unwrap().abs() <= 1e-12 * scale);
        let pw = hq.tangent_project(&x, &w).unwrap();
        let lhs = j_inner(&pv, &w, sig).unwrap();
        let rhs = j_inner(&v, &pw, sig).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale * w.norm().max(1.0));
    }

    #[test]
    fn orthonormalized_frames_are_orthonormal(sig in signature(), raw in prop::collection::vec(-2.0..2.0f64, 25), k in 1usize..=5) {
        let n = sig.n();
        let k = k.min(n);
        let vectors: Vec<DVector<f64>> = (0..k).map(|i| DVector::from_fn(n, |r, _| raw[(i * n + r) % raw.len()])).collect();
        let Ok(frame) = indefinite_orthonormalize(&vectors, sig, 1e-6) else {
            return Ok(());
        };
        for (i, (vi, si)) in frame.vectors.iter().zip(&frame.signs).enumerate() {
            for (j, vj) in frame.vectors.iter().enumerate() {
                let expect = if i == j { *si } else { 0.0 };
                let got = j_inner(vi, vj, sig).unwrap();
                prop_assert!((got - expect).abs() <= 1e-8 * vi.norm() * vj.norm().max(1.0), "<v{i}, v{j}> = {got}");
            }
        }
    }

    #[test]
    fn expressions_round_trip_through_display(e in expr()) {
        let text = e.to_string();
        let parsed = Expr::parse(&text).unwrap();
        prop_assert_eq!(parsed.to_string(), text);
        for t in [-1.3, 0.0, 0.7, 2.0] {
            prop_assert!(same_value(parsed.eval(t), e.eval(t)));
        }
    }

    #[test]
    fn parsing_never_panics(src in "[-+*/^().0-9a-z eE]{0,40}") {
        let _ = Expr::parse(&src);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rolling_rotation_is_an_isometry(x0 in s12_point(), raw in vec3(), v in vec3(), w in vec3()) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let sig = hq.signature();
        let u = hq.tangent_project(&x0, &raw).unwrap();
        prop_assume!(u.amax() > 1e-3);
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times).unwrap();
        let before = j_inner(&v, &w, sig).unwrap();
        for r in &traj.r {
            let scale = r.amax().powi(2) * v.norm().max(1.0) * w.norm().max(1.0);
            let after = j_inner(&(r * &v), &(r * &w), sig).unwrap();
            prop_assert!((after - before).abs() <= 1e-10 * scale, "{after} vs {before}");
        }
    }

    #[test]
    fn transport_preserves_inner_products(x0 in s12_point(), raw in vec3(), y in vec3(), z in vec3()) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let sig = hq.signature();
        let u = hq.tangent_project(&x0, &raw).unwrap();
        prop_assume!(u.amax() > 1e-3);
        let y = hq.tangent_project(&x0, &y).unwrap();
        let z = hq.tangent_project(&x0, &z).unwrap();
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times).unwrap();
        let ys = parallel_transport(&traj, &y, TransportFlavor::Tangent).unwrap();
        let zs = parallel_transport(&traj, &z, TransportFlavor::Tangent).unwrap();
        let before = j_inner(&y, &z, sig).unwrap();
        for (k, (yk, zk)) in ys.iter().zip(&zs).enumerate() {
            let scale = traj.r[k].amax().powi(2) * y.norm().max(1.0) * z.norm().max(1.0);
            prop_assert!((j_inner(yk, zk, sig).unwrap() - before).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn lift_is_linear(
        p in (-0.8..0.8f64, -0.8..0.8f64),
        q in (-1.0..1.0f64, -1.0..1.0f64),
        s in -1.0..1.0f64,
        v in (-1.0..1.0f64, -1.0..1.0f64),
        w in (-1.0..1.0f64, -1.0..1.0f64),
        (alpha, beta) in (-2.0..2.0f64, -2.0..2.0f64),
    ) {
        let pair = ChartPair::lorentz_sphere_over_plane(&dvector![0.0, 0.0, 1.0]).unwrap();
        let x = dvector![p.0, p.1];
        let xhat = dvector![q.0, q.1];
        let a = boost(2, 0, 1, s);
        let b = DMatrix::identity(1, 1);
        let v = dvector![v.0, v.1];
        let w = dvector![w.0, w.1];
        let lv = lift(&pair, &x, &xhat, &a, &b, &v).unwrap();
        let lw = lift(&pair, &x, &xhat, &a, &b, &w).unwrap();
        let lc = lift(&pair, &x, &xhat, &a, &b, &(&v * alpha + &w * beta)).unwrap();
        let tol = 1e-9;
        prop_assert!((&lc.xhat_dot - (&lv.xhat_dot * alpha + &lw.xhat_dot * beta)).amax() <= tol);
        prop_assert!((&lc.a_dot - (&lv.a_dot * alpha + &lw.a_dot * beta)).amax() <= tol);
        prop_assert!((&lc.b_dot - (&lv.b_dot * alpha + &lw.b_dot * beta)).amax() <= tol);
    }

    #[test]
    fn twisting_a_rolling_breaks_horizontality(c in 0.2..1.0f64, sign in prop::bool::ANY) {
        let hq = Hyperquadric::lorentz_sphere(2).unwrap();
        let x0 = dvector![0.0, 0.0, 1.0];
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let traj = integrate_kinematics(&hq, &x0, &Control::constant(dvector![0.5, 1.0, 0.0]), &times).unwrap();
        let pair = ChartPair::lorentz_sphere_over_plane(&x0).unwrap();
        let curve = trivialize_rolling(&traj, &pair).unwrap();
        let straight = horizontality_residual(&curve, &pair).unwrap();
        prop_assert!(straight.iter().all(|r| *r <= 1e-4));
        let rate = if sign { c } else { -c };
        let twisted: Vec<DMatrix<f64>> = curve.a.iter().zip(&curve.times).map(|(a, t)| a * boost(2, 0, 1, rate * t)).collect();
        let bent = TrivializedCurve::new(
            curve.times.clone(),
            curve.x.clone(),
            curve.xhat.clone(),
            twisted,
            curve.b.clone(),
            Signature::new(2, 1).unwrap(),
            Signature::new(1, 0).unwrap(),
        )
        .unwrap();
        let worst = horizontality_residual(&bent, &pair).unwrap().into_iter().fold(0.0, f64::max);
        prop_assert!(worst > 1e-3, "residual {worst}");
    }

    #[test]
    fn causal_trace_of_one_parameter_subgroup((sig, c0, c1) in (signature(), prop::collection::vec(-0.5..0.5f64, 15), prop::collection::vec(-0.5..0.5f64, 15))) {
        let a0 = expm(&algebra_element(sig, &c0));
        let u = algebra_element(sig, &c1);
        let times = uniform_grid(0.0, 1.0, 1e-2).unwrap();
        let a: Vec<DMatrix<f64>> = times.iter().map(|t| &a0 * expm(&(&u * *t))).collect();
        let expect = -(&u * &u).trace();
        let scale = 1.0 + u.norm_squared();
        for s in causal_trace(&times, &a, sig).unwrap() {
            prop_assert!((s.value - expect).abs() <= 1e-6 * scale, "trace {} vs {expect}", s.value);
            prop_assert!((s.j_inner - expect).abs() <= 1e-6 * scale, "<<A',A'>> {} vs {expect}", s.j_inner);
        }
    }
}
