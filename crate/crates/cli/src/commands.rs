//! The subcommands. Each writes its files into the output directory and
//! reports whether its checks passed.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use pseudoroll::control::Control;
use pseudoroll::diff::uniform_grid;
use pseudoroll::distribution::{
    causal_trace, causal_trace_formula, horizontality_residual, trivialize, ChartPair, TrivializedCurve,
};
use pseudoroll::hyperquadric::{Geometry, Hyperquadric, HyperquadricSlice};
use pseudoroll::indefinite::{j_inner, Signature};
use pseudoroll::intrinsic::{
    configuration_matrices, freedom_dimension, adapted_frame, FrameSet, DEFAULT_PARALLEL_TOL, DEFAULT_RANK_TOL,
};
use pseudoroll::kinematics::{
    causal_report, curves, integrate_kinematics, parallel_transport, verify_rolling_with, RollingTrajectory, TransportFlavor,
};
use pseudoroll::reachability::{broken_geodesic_suggestion, classify, hyperplane_test, linspace, sample_partition, Region};

use crate::scenario::{ChartsSpec, FramesSpec, Scenario};
use crate::table::{matrix_columns, vector_columns, write_json, NumericTable, Row, Table};
use crate::CliError;

pub const DEFAULT_GRID: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Roll,
    Verify,
    Transport,
    Reach,
    Partition,
    Frames,
    ConfigMatrices,
    LiftCheck,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Roll,
        Command::Verify,
        Command::Transport,
        Command::Reach,
        Command::Partition,
        Command::Frames,
        Command::ConfigMatrices,
        Command::LiftCheck,
        Command::Selftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Roll => "roll",
            Command::Verify => "verify",
            Command::Transport => "transport",
            Command::Reach => "reach",
            Command::Partition => "partition",
            Command::Frames => "frames",
            Command::ConfigMatrices => "config-matrices",
            Command::LiftCheck => "lift-check",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Flags shared by all subcommands; `tol` and `step` override the scenario.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Options {
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub tol: Option<f64>,
    pub step: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// Human-readable lines for stdout (or stderr on failure).
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            crate::EXIT_OK
        } else {
            crate::EXIT_CHECK_FAILED
        }
    }
}

pub fn run(cmd: Command, opts: &Options) -> Result<Outcome, CliError> {
    if cmd == Command::Selftest {
        return Ok(crate::selftest::run());
    }
    let path = opts
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("{cmd} needs --scenario <path>")))?;
    let mut sc = Scenario::from_path(path)?;
    if let Some(tol) = opts.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Input(format!("--tol must be positive, got {tol}")));
        }
        sc.tol = tol;
    }
    if let Some(step) = opts.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Input(format!("--step must be positive, got {step}")));
        }
        sc.step = step;
    }
    let grid = opts.grid.unwrap_or(DEFAULT_GRID);
    if grid < 2 {
        return Err(CliError::Input(format!("--grid must be at least 2, got {grid}")));
    }
    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::Io { path: opts.out.clone(), source: e })?;
    let out = Out { dir: &opts.out, files: Vec::new() };
    match cmd {
        Command::Roll => roll(&sc, out),
        Command::Verify => verify(&sc, out),
        Command::Transport => transport(&sc, out),
        Command::Reach => reach(&sc, out),
        Command::Partition => partition(&sc, grid, out),
        Command::Frames => frames(&sc, out),
        Command::ConfigMatrices => config_matrices(&sc, out),
        Command::LiftCheck => lift_check(&sc, out),
        Command::Selftest => unreachable!(),
    }
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Out<'_> {
    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let p = self.dir.join(name);
        t.write(&p)?;
        self.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<(), CliError> {
        let p = self.dir.join(name);
        write_json(&p, v)?;
        self.files.push(p);
        Ok(())
    }

    fn finish(self, passed: bool, summary: Vec<String>) -> Result<Outcome, CliError> {
        Ok(Outcome { passed, summary, files: self.files })
    }
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn check(label: &str, value: f64, tol: f64) -> String {
    let verdict = if value <= tol { "ok" } else { "FAIL" };
    format!("{label}: {value:.3e} (tol {tol:.1e}) {verdict}")
}

fn integrate(sc: &Scenario) -> Result<RollingTrajectory, CliError> {
    let hq = sc.hyperquadric()?;
    let ctrl = sc.control()?;
    Ok(integrate_kinematics(&hq, &sc.x0(), &ctrl, &sc.times()?)?)
}

fn roll(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let traj = integrate(sc)?;
    let n = sc.signature.n();
    let (x, xhat) = curves(&traj);
    let drift = traj.group_drift();
    let mut header = vec!["t".to_string()];
    header.extend(vector_columns("s", n));
    header.extend(matrix_columns("r", n, n));
    header.extend(vector_columns("x", n));
    header.extend(vector_columns("xhat", n));
    header.extend(["membership".to_string(), "drift".to_string()]);
    let mut t = Table::new(header);
    let mut membership = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let m = traj.hq.membership_residual(&x.points[k]).abs();
        membership.push(m);
        t.push(
            Row::new()
                .num(traj.times[k])
                .vector(&traj.s[k])
                .matrix(&traj.r[k])
                .vector(&x.points[k])
                .vector(&xhat.points[k])
                .num(m)
                .num(drift[k]),
        );
    }
    out.table("trajectory.csv", &t)?;
    let summary = vec![
        format!("samples: {}", traj.len()),
        format!("max group drift: {:.3e}", max_of(drift)),
        format!("max membership residual: {:.3e}", max_of(membership)),
    ];
    out.finish(true, summary)
}

fn verify(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let traj = integrate(sc)?;
    let report = verify_rolling_with(&traj, sc.tol, sc.group)?;
    let causal = causal_report(&traj)?;
    let mismatch = max_of(causal.iter().map(|c| c.mismatch(sc.level)));

    let mut t = Table::new(["t", "xdot_sq", "xhat_dot_sq", "u_sq", "rdot_sq", "class"].map(String::from).to_vec());
    for c in &causal {
        t.push(Row::new().num(c.t).num(c.xdot_sq).num(c.xhat_dot_sq).num(c.u_sq).num(c.rdot_sq).text(c.class.as_str()));
    }
    out.table("causal.csv", &t)?;

    let passed = report.passed() && mismatch <= sc.tol;
    let residuals: serde_json::Map<String, serde_json::Value> = report.residuals().iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    out.json(
        "verify.json",
        &json!({
            "tol": sc.tol,
            "group": sc.group,
            "residuals": residuals,
            "causal_mismatch": mismatch,
            "max_group_drift": traj.max_group_drift(),
            "passed": passed,
        }),
    )?;
    let mut summary: Vec<String> = report.residuals().iter().map(|(k, v)| check(k, *v, sc.tol)).collect();
    summary.push(check("causal_mismatch", mismatch, sc.tol));
    out.finish(passed, summary)
}

fn transport(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let spec = sc.transport.as_ref().ok_or_else(|| CliError::Input("transport: scenario has no \"transport\" section".into()))?;
    let traj = integrate(sc)?;
    let sig = sc.signature;
    let n = sig.n();
    let y0 = DVector::from_vec(spec.y0.clone());
    let ys = parallel_transport(&traj, &y0, spec.flavor)?;
    let (x, _) = curves(&traj);
    let norm0 = j_inner(&y0, &y0, sig)?;

    let mut header = vec!["t".to_string()];
    header.extend(vector_columns("y", n));
    header.extend(["norm_sq".to_string(), "off_space".to_string()]);
    let mut t = Table::new(header);
    let mut norm_err: f64 = 0.0;
    let mut off_err: f64 = 0.0;
    for (k, y) in ys.iter().enumerate() {
        let nsq = j_inner(y, y, sig)?;
        let tangent = traj.hq.tangent_project(&x.points[k], y)?;
        // Distance from the space the field should stay in.
        let off = match spec.flavor {
            TransportFlavor::Tangent => (y - &tangent).amax(),
            TransportFlavor::Normal => tangent.amax(),
        };
        norm_err = norm_err.max((nsq - norm0).abs());
        off_err = off_err.max(off);
        t.push(Row::new().num(traj.times[k]).vector(y).num(nsq).num(off));
    }
    out.table("transport.csv", &t)?;
    let summary = vec![check("norm drift", norm_err, sc.tol), check("off-space component", off_err, sc.tol)];
    out.finish(norm_err <= sc.tol && off_err <= sc.tol, summary)
}

fn reach(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let spec = sc.reach.as_ref().ok_or_else(|| CliError::Input("reach: scenario has no \"reach\" section".into()))?;
    let hq = sc.hyperquadric()?;
    let x0 = sc.x0();
    let x1 = DVector::from_vec(spec.x1.clone());
    let res = classify(&hq, &x0, &x1)?;
    let region = hyperplane_test(&hq, &x0, &x1)?;
    let mut summary = vec![format!("kind: {}", res.kind), format!("region: {region}"), format!("<x0, x1>: {:.17e}", res.inner)];
    let mut report = json!({
        "kind": res.kind,
        "region": region,
        "inner": res.inner,
        "u": res.u.as_ref().map(|u| u.as_slice().to_vec()),
        "t1": res.t1,
    });
    let mut passed = true;
    if let (Some(u), Some(t1)) = (res.u.clone(), res.t1) {
        let end_err = (res.endpoint(&x0).expect("reachable") - &x1).amax();
        let times = uniform_grid(0.0, t1, sc.step).map_err(|e| CliError::Input(format!("reach: {e}")))?;
        let traj = integrate_kinematics(&hq, &x0, &Control::constant(u), &times)?;
        let (x, _) = curves(&traj);
        let roll_err = (x.points.last().expect("non-empty grid") - &x1).amax();
        report["endpoint_error"] = json!(end_err);
        report["roundtrip_error"] = json!(roll_err);
        summary.push(check("geodesic endpoint error", end_err, sc.tol));
        summary.push(check("rolling round-trip error", roll_err, sc.tol));
        passed = end_err <= sc.tol && roll_err <= sc.tol;

        let mut header = vec!["t".to_string()];
        header.extend(vector_columns("x", sc.signature.n()));
        header.push("geodesic_error".into());
        let mut t = Table::new(header);
        for (k, tk) in times.iter().enumerate() {
            let g = res.point_at(&x0, *tk).expect("reachable");
            t.push(Row::new().num(*tk).vector(&x.points[k]).num((&x.points[k] - g).amax()));
        }
        out.table("reach.csv", &t)?;
    } else if let Some((first, second)) = broken_geodesic_suggestion(&hq, &x0, &x1)? {
        let leg = |r: &pseudoroll::reachability::ReachabilityResult| {
            json!({"kind": r.kind, "u": r.u.as_ref().map(|u| u.as_slice().to_vec()), "t1": r.t1})
        };
        report["broken_geodesic"] = json!([leg(&first), leg(&second)]);
        summary.push(format!("via -x1: {} then {}", first.kind, second.kind));
    }
    report["passed"] = json!(passed);
    out.json("reach.json", &report)?;
    out.finish(passed, summary)
}

fn partition(sc: &Scenario, grid: usize, mut out: Out) -> Result<Outcome, CliError> {
    if sc.signature != Signature::lorentzian(3).expect("valid") || sc.level != 1.0 {
        return Err(CliError::Input("partition: needs the Lorentz sphere S^2_1 (signature {n: 3, nu: 1}, level 1)".into()));
    }
    let spec = sc.partition.clone().unwrap_or_default();
    let a = linspace(spec.a_range[0], spec.a_range[1], grid);
    let b = linspace(spec.b_range[0], spec.b_range[1], grid);
    let points = sample_partition(&sc.x0(), &a, &b)?;

    let header = ["a", "b", "x_1", "x_2", "x_3", "inner", "kind", "region"].map(String::from).to_vec();
    let mut t = Table::new(header);
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    let mut violations = 0usize;
    for p in &points {
        let region = Region::of_kind(p.kind);
        if region != Region::from_inner(p.inner) {
            violations += 1;
        }
        *counts.entry(region.as_str()).or_default() += 1;
        t.push(Row::new().num(p.a).num(p.b).vector(&p.x).num(p.inner).text(p.kind.as_str()).text(region.as_str()));
    }
    out.table("partition.csv", &t)?;
    let total = points.len().max(1) as f64;
    let fractions: serde_json::Map<String, serde_json::Value> =
        counts.iter().map(|(k, v)| (k.to_string(), json!(*v as f64 / total))).collect();
    out.json(
        "partition.json",
        &json!({"x0": sc.x0, "grid": grid, "points": points.len(), "counts": counts, "fractions": fractions, "rule_violations": violations}),
    )?;
    let mut summary = vec![format!("points: {}", points.len())];
    summary.extend(counts.iter().map(|(k, v)| format!("{k}: {v} ({:.4})", *v as f64 / total)));
    summary.push(format!("rule violations: {violations}"));
    out.finish(violations == 0, summary)
}

fn vectors(v: &[Vec<f64>]) -> Vec<DVector<f64>> {
    v.iter().map(|c| DVector::from_vec(c.clone())).collect()
}

fn frame_sets(traj: &RollingTrajectory, spec: &FramesSpec) -> Result<(FrameSet, FrameSet), CliError> {
    let (x, xhat) = curves(traj);
    let plane = traj.affine_plane();
    let along_x = FrameSet::along(&traj.hq, &x, &vectors(&spec.tangent), &vectors(&spec.normal))?;
    let along_xhat = FrameSet::along(
        &plane,
        &xhat,
        &vectors(spec.tangent_hat.as_ref().unwrap_or(&spec.tangent)),
        &vectors(spec.normal_hat.as_ref().unwrap_or(&spec.normal)),
    )?;
    Ok((along_x, along_xhat))
}

fn gram_defect(vs: &[DVector<f64>], signs: &[f64], sig: Signature) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let want = if i == j { signs[i] } else { 0.0 };
            worst = worst.max((j_inner(a, b, sig).unwrap_or(f64::INFINITY) - want).abs());
        }
    }
    worst
}

fn frame_table(fs: &FrameSet, sig: Signature) -> Table {
    let n = sig.n();
    let mut header = vec!["t".to_string()];
    for i in 1..=fs.tangent.rank() {
        header.extend(vector_columns(&format!("e{i}"), n));
    }
    for i in 1..=fs.normal.rank() {
        header.extend(vector_columns(&format!("n{i}"), n));
    }
    header.push("deviation".into());
    let mut t = Table::new(header);
    for k in 0..fs.tangent.len() {
        let mut row = Row::new().num(fs.tangent.times[k]);
        let all: Vec<DVector<f64>> = fs.tangent.vectors[k].iter().chain(&fs.normal.vectors[k]).cloned().collect();
        for v in &all {
            row = row.vector(v);
        }
        let signs: Vec<f64> = fs.tangent.signs.iter().chain(&fs.normal.signs).copied().collect();
        t.push(row.num(gram_defect(&all, &signs, sig)));
    }
    t
}

fn parallel_residuals(geom: &dyn Geometry, curve: &pseudoroll::hyperquadric::CurveSamples, fs: &FrameSet) -> Result<f64, CliError> {
    let tan = fs.tangent.parallel_residual(geom, curve)?;
    let nrm = fs.normal.parallel_residual(geom, curve)?;
    Ok(tan.max(nrm))
}

fn frames(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let spec = sc.frames.as_ref().ok_or_else(|| CliError::Input("frames: scenario has no \"frames\" section".into()))?;
    let traj = integrate(sc)?;
    let (along_x, along_xhat) = frame_sets(&traj, spec)?;
    let (x, xhat) = curves(&traj);
    let plane = traj.affine_plane();
    let sig = sc.signature;
    out.table("frames.csv", &frame_table(&along_x, sig))?;
    out.table("frames_hat.csv", &frame_table(&along_xhat, sig))?;

    let par = parallel_residuals(&traj.hq, &x, &along_x)?;
    let par_hat = parallel_residuals(&plane, &xhat, &along_xhat)?;
    let gram = along_x.tangent.gram_residual(sig).max(along_x.normal.gram_residual(sig));
    let gram_hat = along_xhat.tangent.gram_residual(sig).max(along_xhat.normal.gram_residual(sig));
    let mut report = json!({
        "parallel_residual": par,
        "parallel_residual_hat": par_hat,
        "gram_residual": gram,
        "gram_residual_hat": gram_hat,
    });
    let mut summary = vec![
        check("parallel residual", par, sc.tol),
        check("parallel residual (development)", par_hat, sc.tol),
        check("gram residual", gram.max(gram_hat), sc.tol),
    ];
    match adapted_frame(&traj.hq, &x, &along_x.tangent, DEFAULT_RANK_TOL) {
        Ok(ad) => {
            let k = freedom_dimension(&traj.hq, &x, &along_x.tangent, DEFAULT_RANK_TOL)?;
            report["freedom_dimension"] = json!(k);
            report["freedom_index"] = json!(ad.xi);
            summary.push(format!("freedom dimension: {k} (index {})", ad.xi));
        }
        Err(pseudoroll::Error::Normalization { .. }) | Err(pseudoroll::Error::DegenerateSubspace) => {
            report["freedom_dimension"] = serde_json::Value::Null;
            summary.push("freedom dimension: undefined (degenerate velocity span)".into());
        }
        Err(e) => return Err(e.into()),
    }
    let passed = par <= sc.tol && par_hat <= sc.tol && gram.max(gram_hat) <= sc.tol;
    report["passed"] = json!(passed);
    out.json("frames.json", &report)?;
    out.finish(passed, summary)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn config_matrices(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let spec = sc.frames.as_ref().ok_or_else(|| CliError::Input("config-matrices: scenario has no \"frames\" section".into()))?;
    let traj = integrate(sc)?;
    let (along_x, along_xhat) = frame_sets(&traj, spec)?;
    let cm = configuration_matrices(&traj, &along_x, &along_xhat, DEFAULT_PARALLEL_TOL)?;
    let (m, c) = (cm.a.nrows(), cm.b.nrows());
    let mut header = vec!["t".to_string()];
    header.extend(matrix_columns("a", m, m));
    header.extend(matrix_columns("b", c, c));
    header.push("deviation".into());
    let mut t = Table::new(header);
    for k in 0..traj.len() {
        let dev = (&cm.a_series[k] - &cm.a).amax().max((&cm.b_series[k] - &cm.b).amax());
        t.push(Row::new().num(traj.times[k]).matrix(&cm.a_series[k]).matrix(&cm.b_series[k]).num(dev));
    }
    out.table("config_matrices.csv", &t)?;
    let passed = cm.deviation <= sc.tol;
    out.json("config_matrices.json", &json!({"a": rows(&cm.a), "b": rows(&cm.b), "deviation": cm.deviation, "tol": sc.tol, "passed": passed}))?;
    let summary = vec![format!("A = {:?}", rows(&cm.a)), format!("B = {:?}", rows(&cm.b)), check("time deviation", cm.deviation, sc.tol)];
    out.finish(passed, summary)
}

fn chart_pair(sc: &Scenario, charts: &ChartsSpec) -> Result<ChartPair, CliError> {
    if sc.signature != Signature::lorentzian(3).expect("valid") || sc.level != 1.0 {
        return Err(CliError::Input("lift-check: the built-in charts need S^2_1 (signature {n: 3, nu: 1}, level 1)".into()));
    }
    let x0 = sc.x0();
    Ok(match charts {
        ChartsSpec::LorentzSphereOverPlane => ChartPair::lorentz_sphere_over_plane(&x0)?,
        ChartsSpec::RotatedSliceOverPlane { ca, cb } => {
            let (ca, cb) = (*ca, *cb);
            let x4 = DVector::from_iterator(4, x0.iter().copied().chain([0.0]));
            ChartPair::rotated_slice_over_plane(move |x: &DVector<f64>| ca * x[0] + cb * x[1], &x4)?
        }
    })
}

/// Column names of a trivialized-curve CSV for a chart pair of intrinsic
/// dimension `m` and codimension `c`.
pub fn trivialized_columns(m: usize, c: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    header.extend(vector_columns("x", m));
    header.extend(vector_columns("xhat", m));
    header.extend(matrix_columns("a", m, m));
    header.extend(matrix_columns("b", c, c));
    header
}

pub fn trivialized_table(curve: &TrivializedCurve) -> Table {
    let m = curve.x.first().map_or(0, |v| v.len());
    let c = curve.b.first().map_or(0, |b| b.nrows());
    let mut t = Table::new(trivialized_columns(m, c));
    for k in 0..curve.len() {
        t.push(Row::new().num(curve.times[k]).vector(&curve.x[k]).vector(&curve.xhat[k]).matrix(&curve.a[k]).matrix(&curve.b[k]));
    }
    t
}

/// Reads a trivialized-curve CSV for `pair`; the group constraints on `A`
/// and `B` are checked.
pub fn read_trivialized(src: &str, what: &str, pair: &ChartPair) -> Result<TrivializedCurve, CliError> {
    let m = pair.chart.metric_chart().dim();
    let c = pair.chart.codim();
    let table = NumericTable::parse(src, what)?;
    let cols = table.columns(&trivialized_columns(m, c), what)?;
    if table.rows.is_empty() {
        return Err(CliError::Input(format!("{what}: no samples")));
    }
    let mut times = Vec::new();
    let (mut x, mut xhat, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for row in &table.rows {
        let mut it = cols.iter().map(|&i| row[i]);
        times.push(it.next().expect("t column"));
        x.push(DVector::from_iterator(m, it.by_ref().take(m)));
        xhat.push(DVector::from_iterator(m, it.by_ref().take(m)));
        a.push(DMatrix::from_row_iterator(m, m, it.by_ref().take(m * m)));
        b.push(DMatrix::from_row_iterator(c, c, it.by_ref().take(c * c)));
    }
    let sig_a = pair.chart.metric_chart().signature()?;
    let (_, nsigns) = pair.chart.normal_frame(&x[0])?;
    let sig_b = Signature::new(c, nsigns.iter().filter(|s| **s < 0.0).count())?;
    TrivializedCurve::new(times, x, xhat, a, b, sig_a, sig_b).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

/// Trivializes the scenario's rolling in the chart pair.
fn trivialize_scenario(sc: &Scenario, pair: &ChartPair, charts: &ChartsSpec) -> Result<TrivializedCurve, CliError> {
    let traj = integrate(sc)?;
    let (x, xhat) = curves(&traj);
    let dg: Vec<DMatrix<f64>> = (0..traj.len()).map(|k| traj.r_inv(k)).collect();
    Ok(match charts {
        ChartsSpec::LorentzSphereOverPlane => trivialize(&traj.times, &x.points, &xhat.points, &dg, pair)?,
        ChartsSpec::RotatedSliceOverPlane { .. } => {
            let slice = HyperquadricSlice::new(Hyperquadric::lorentz_sphere(2)?)?;
            let xs: Vec<_> = x.points.iter().map(|p| slice.lift(p)).collect();
            let xhs: Vec<_> = xhat.points.iter().map(|p| slice.lift(p)).collect();
            let dg4: Vec<_> = dg
                .iter()
                .map(|g| {
                    let mut g4 = DMatrix::identity(4, 4);
                    g4.view_mut((0, 0), (3, 3)).copy_from(g);
                    g4
                })
                .collect();
            trivialize(&traj.times, &xs, &xhs, &dg4, pair)?
        }
    })
}

fn lift_check(sc: &Scenario, mut out: Out) -> Result<Outcome, CliError> {
    let spec = sc.lift.as_ref().ok_or_else(|| CliError::Input("lift-check: scenario has no \"lift\" section".into()))?;
    let pair = chart_pair(sc, &spec.charts)?;
    let curve = match &spec.curve {
        Some(p) => {
            let path = sc.resolve(p);
            let src = std::fs::read_to_string(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            read_trivialized(&src, &path.display().to_string(), &pair)?
        }
        None => {
            let curve = trivialize_scenario(sc, &pair, &spec.charts)?;
            out.table("trivialized.csv", &trivialized_table(&curve))?;
            curve
        }
    };
    if curve.len() < 3 {
        return Err(CliError::Input("lift-check: the curve needs at least 3 samples".into()));
    }
    let residual = horizontality_residual(&curve, &pair)?;
    let sig_a = pair.chart.metric_chart().signature()?;
    let (_, nsigns) = pair.chart.normal_frame(&curve.x[0])?;
    let sig_b = Signature::new(nsigns.len(), nsigns.iter().filter(|s| **s < 0.0).count())?;
    let trace_a = causal_trace(&curve.times, &curve.a, sig_a)?;
    let trace_b = causal_trace(&curve.times, &curve.b, sig_b)?;
    let formula = causal_trace_formula(&curve, &pair)?;

    let header = [
        "t",
        "residual",
        "trace_a",
        "j_inner_a",
        "class_a",
        "formula_a",
        "trace_b",
        "formula_b",
        "class_b",
    ]
    .map(String::from)
    .to_vec();
    let mut t = Table::new(header);
    let mut agreement: f64 = 0.0;
    for k in 0..curve.len() {
        let (ta, tb, f) = (&trace_a[k], &trace_b[k], &formula[k]);
        agreement = agreement.max((ta.value - f.tangent).abs()).max((tb.value - f.normal).abs());
        t.push(
            Row::new()
                .num(curve.times[k])
                .num(residual[k])
                .num(ta.value)
                .num(ta.j_inner)
                .text(ta.class.as_str())
                .num(f.tangent)
                .num(tb.value)
                .num(f.normal)
                .text(tb.class.as_str()),
        );
    }
    out.table("lift_check.csv", &t)?;
    let worst = max_of(residual.iter().copied());
    let passed = worst <= sc.tol;
    out.json(
        "lift_check.json",
        &json!({"samples": curve.len(), "max_residual": worst, "trace_formula_agreement": agreement, "tol": sc.tol, "passed": passed}),
    )?;
    let summary = vec![
        check("horizontality residual", worst, sc.tol),
        format!("trace vs formula: {agreement:.3e}"),
    ];
    out.finish(passed, summary)
}
