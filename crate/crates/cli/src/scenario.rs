//! Scenario files: JSON descriptions of a rolling and of what to compute.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use pseudoroll::control::Control;
use pseudoroll::diff::{uniform_grid, DEFAULT_STEP};
use pseudoroll::hyperquadric::Hyperquadric;
use pseudoroll::indefinite::{GroupChoice, Signature};
use pseudoroll::kinematics::{TransportFlavor, DEFAULT_VERIFY_TOL};

use crate::CliError;

fn default_level() -> f64 {
    1.0
}

fn default_t_end() -> f64 {
    1.0
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_tol() -> f64 {
    DEFAULT_VERIFY_TOL
}

/// How the control `u(t)` is given. Serialized as `{"type": ..., "data": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Constant(Vec<f64>),
    /// One expression in `t` per component.
    Expr(Vec<String>),
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl ControlSpec {
    pub fn build(&self) -> Result<Control, CliError> {
        let input = |e: pseudoroll::Error| CliError::Input(format!("control: {e}"));
        match self {
            ControlSpec::Constant(u) => Ok(Control::constant(DVector::from_vec(u.clone()))),
            ControlSpec::Expr(src) => Control::from_exprs(src).map_err(input),
            ControlSpec::Sampled { times, values } => {
                Control::sampled(times.clone(), values.iter().map(|v| DVector::from_vec(v.clone())).collect()).map_err(input)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    pub flavor: TransportFlavor,
    pub y0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachSpec {
    pub x1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(default = "default_a_range")]
    pub a_range: [f64; 2],
    #[serde(default = "default_b_range")]
    pub b_range: [f64; 2],
}

fn default_a_range() -> [f64; 2] {
    [-2.0, 2.0]
}

fn default_b_range() -> [f64; 2] {
    [-std::f64::consts::PI, std::f64::consts::PI]
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { a_range: default_a_range(), b_range: default_b_range() }
    }
}

/// Initial frames at `x0` along the rolling curve and the development.
/// Missing development frames default to the rolling-curve ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesSpec {
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<Vec<f64>>,
    #[serde(default)]
    pub tangent_hat: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub normal_hat: Option<Vec<Vec<f64>>>,
}

/// Built-in chart pairs for `lift-check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartsSpec {
    /// `S^2_1` in `(a, b)` coordinates over its tangent plane at `x0`.
    LorentzSphereOverPlane,
    /// `S^2_1 x {0}` in `R^4_1` with normals rotated by `theta = ca * a + cb * b`.
    RotatedSliceOverPlane { ca: f64, cb: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub charts: ChartsSpec,
    /// Trivialized-curve CSV; relative paths are resolved against the
    /// scenario file. When absent the scenario's own rolling is used.
    #[serde(default)]
    pub curve: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub signature: Signature,
    #[serde(default = "default_level", alias = "level_r")]
    pub level: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub group: GroupChoice,
    #[serde(default)]
    pub transport: Option<TransportSpec>,
    #[serde(default)]
    pub reach: Option<ReachSpec>,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub frames: Option<FramesSpec>,
    #[serde(default)]
    pub lift: Option<LiftSpec>,
    /// Directory used to resolve relative paths; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    /// Parses and validates; syntax errors carry `line:column`.
    pub fn from_json(src: &str) -> Result<Self, CliError> {
        let sc: Scenario = serde_json::from_str(src).map_err(|e| {
            let line = e.line();
            let col = e.column();
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            CliError::Input(format!("scenario:{line}:{col}: {msg}"))
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut sc = Self::from_json(&src).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(m.replacen("scenario", &path.display().to_string(), 1)),
            other => other,
        })?;
        sc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sc)
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.signature.n();
        let bad = |m: String| Err(CliError::Input(m));
        if self.x0.len() != n {
            return bad(format!("x0: expected {n} components, got {}", self.x0.len()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step: must be positive, got {}", self.step));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end: must be positive, got {}", self.t_end));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol: must be positive, got {}", self.tol));
        }
        if self.level == 0.0 || !self.level.is_finite() {
            return bad(format!("level: must be finite and nonzero, got {}", self.level));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return bad("x0: components must be finite".into());
        }
        match &self.control {
            Some(ControlSpec::Constant(u)) if u.len() != n => return bad(format!("control: expected {n} components, got {}", u.len())),
            Some(ControlSpec::Expr(e)) if e.len() != n => return bad(format!("control: expected {n} expressions, got {}", e.len())),
            Some(ControlSpec::Sampled { values, .. }) if values.iter().any(|v| v.len() != n) => {
                return bad(format!("control: every sample needs {n} components"))
            }
            _ => {}
        }
        if let Some(t) = &self.transport {
            if t.y0.len() != n {
                return bad(format!("transport.y0: expected {n} components, got {}", t.y0.len()));
            }
        }
        if let Some(r) = &self.reach {
            if r.x1.len() != n {
                return bad(format!("reach.x1: expected {n} components, got {}", r.x1.len()));
            }
        }
        if let Some(f) = &self.frames {
            let all = [Some(&f.tangent), Some(&f.normal), f.tangent_hat.as_ref(), f.normal_hat.as_ref()];
            if all.iter().flatten().flat_map(|vs| vs.iter()).any(|v| v.len() != n) {
                return bad(format!("frames: every vector needs {n} components"));
            }
        }
        Ok(())
    }

    pub fn hyperquadric(&self) -> Result<Hyperquadric, CliError> {
        Hyperquadric::new(self.signature, self.level).map_err(|e| CliError::Input(format!("hyperquadric: {e}")))
    }

    pub fn x0(&self) -> DVector<f64> {
        DVector::from_vec(self.x0.clone())
    }

    pub fn control(&self) -> Result<Control, CliError> {
        self.control.as_ref().ok_or_else(|| CliError::Input("control: missing".into()))?.build()
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        uniform_grid(0.0, self.t_end, self.step).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Benchmark scenario: `S^2_1`, `x0 = (0, 0, 1)`, constant timelike control.
    pub fn benchmark() -> Self {
        Self {
            signature: Signature::lorentzian(3).expect("valid"),
            level: 1.0,
            x0: vec![0.0, 0.0, 1.0],
            control: Some(ControlSpec::Constant(vec![1.0, 0.0, 0.0])),
            t_end: 2.0,
            step: DEFAULT_STEP,
            tol: DEFAULT_VERIFY_TOL,
            group: GroupChoice::default(),
            transport: None,
            reach: None,
            partition: None,
            frames: None,
            lift: None,
            base_dir: PathBuf::new(),
        }
    }
}
