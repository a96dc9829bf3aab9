use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::diff::validate_grid;
use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;

type ControlFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A rolling control `t -> u(t)` with values in the ambient space.
#[derive(Clone)]
pub enum Control {
    Constant(DVector<f64>),
    /// Piecewise-linear interpolation of samples, held constant outside the grid.
    Sampled { times: Vec<f64>, values: Vec<DVector<f64>> },
    /// One expression in `t` per component.
    Expr(Vec<Expr>),
    Closure(ControlFn),
}

impl fmt::Debug for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::Constant(u) => f.debug_tuple("Constant").field(&u.as_slice()).finish(),
            Control::Sampled { times, .. } => f.debug_struct("Sampled").field("samples", &times.len()).finish(),
            Control::Expr(e) => {
                let parts: Vec<String> = e.iter().map(|x| x.to_string()).collect();
                f.debug_tuple("Expr").field(&parts).finish()
            }
            Control::Closure(_) => f.write_str("Closure"),
        }
    }
}

impl Control {
    pub fn constant(u: DVector<f64>) -> Self {
        Control::Constant(u)
    }

    pub fn sampled(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        validate_grid(&times, 1)?;
        check_dim(times.len(), values.len())?;
        let n = values[0].len();
        for v in &values {
            check_dim(n, v.len())?;
        }
        Ok(Control::Sampled { times, values })
    }

    pub fn from_exprs<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Parse("expression control needs at least one component".into()));
        }
        let exprs = sources
            .iter()
            .enumerate()
            .map(|(k, s)| Expr::parse(s.as_ref()).map_err(|e| Error::Parse(format!("component {k}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Control::Expr(exprs))
    }

    pub fn closure(f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Control::Closure(Arc::new(f))
    }

    /// Number of components, if it can be known without evaluating.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Control::Constant(u) => Some(u.len()),
            Control::Sampled { values, .. } => Some(values[0].len()),
            Control::Expr(e) => Some(e.len()),
            Control::Closure(_) => None,
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Control::Constant(u) => u.clone(),
            Control::Sampled { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    values[0].clone()
                } else if k == times.len() {
                    values[k - 1].clone()
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    &values[k - 1] * (1.0 - w) + &values[k] * w
                }
            }
            Control::Expr(e) => DVector::from_iterator(e.len(), e.iter().map(|x| x.eval(t))),
            Control::Closure(f) => f(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn sampled_interpolates_linearly() {
        let c = Control::sampled(vec![0.0, 1.0, 3.0], vec![dvector![0.0, 0.0], dvector![1.0, 2.0], dvector![3.0, 2.0]]).unwrap();
        assert_eq!(c.eval(-1.0), dvector![0.0, 0.0]);
        assert_eq!(c.eval(0.5), dvector![0.5, 1.0]);
        assert_eq!(c.eval(2.0), dvector![2.0, 2.0]);
        assert_eq!(c.eval(5.0), dvector![3.0, 2.0]);
        assert!(Control::sampled(vec![0.0, 0.0], vec![dvector![0.0], dvector![1.0]]).is_err());
        assert!(Control::sampled(vec![0.0, 1.0], vec![dvector![0.0], dvector![1.0, 2.0]]).is_err());
    }

    #[test]
    fn expression_control() {
        let c = Control::from_exprs(&["sinh(t)", "0", "cosh(t)"]).unwrap();
        assert_eq!(c.dim(), Some(3));
        assert_eq!(c.eval(1.0), dvector![1f64.sinh(), 0.0, 1f64.cosh()]);
        let err = Control::from_exprs(&["t", "t +"]).unwrap_err();
        assert!(err.to_string().starts_with("component 1"));
    }

    #[test]
    fn closure_control() {
        let c = Control::closure(|t| dvector![t, 2.0 * t]);
        assert_eq!(c.dim(), None);
        assert_eq!(c.eval(2.0), dvector![2.0, 4.0]);
    }
}
