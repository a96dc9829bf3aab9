//! Finite differences and local polynomial interpolation on non-uniform grids.
//!
//! First derivatives use a five-point centered stencil (fourth order) in the
//! interior and four-point stencils (third order) at the two samples nearest
//! each end; grids of exactly three samples fall back to second order.

use std::ops::{AddAssign, Mul};

use crate::error::{Error, Result};

/// Default time step used across the crate.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Weights `c[j][k]` of the `k`-th derivative at `z` for nodes `x[j]`
/// (Fornberg's recursion).
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; max_order + 1]; n];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Checks that `times` is strictly increasing with at least `min_len` samples.
pub fn validate_grid(times: &[f64], min_len: usize) -> Result<()> {
    if times.len() < min_len {
        return Err(Error::Grid(format!("need at least {min_len} samples, got {}", times.len())));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("non-finite time".into()));
    }
    let span = (times[times.len() - 1] - times[0]).abs().max(1.0);
    for w in times.windows(2) {
        if w[1] - w[0] <= 1e-13 * span {
            return Err(Error::Grid(format!("times must increase strictly ({} then {})", w[0], w[1])));
        }
    }
    Ok(())
}

/// Indices and first-derivative weights used at sample `k`.
pub fn derivative_stencil(times: &[f64], k: usize) -> Vec<(usize, f64)> {
    let n = times.len();
    let idx: Vec<usize> = if n >= 5 && k >= 2 && k + 2 < n {
        (k - 2..=k + 2).collect()
    } else {
        let width = n.min(4);
        let start = k.saturating_sub(1).min(n - width);
        (start..start + width).collect()
    };
    let nodes: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let w = fornberg_weights(times[k], &nodes, 1);
    idx.into_iter().zip(w.into_iter().map(|c| c[1])).collect()
}

/// Time derivative of sampled values of any vector-space type.
pub fn differentiate<T>(times: &[f64], values: &[T]) -> Result<Vec<T>>
where
    T: Clone + AddAssign + Mul<f64, Output = T>,
{
    validate_grid(times, 3)?;
    if values.len() != times.len() {
        return Err(Error::Dimension { expected: times.len(), got: values.len() });
    }
    Ok((0..times.len())
        .map(|k| {
            let stencil = derivative_stencil(times, k);
            let mut acc = values[stencil[0].0].clone() * stencil[0].1;
            for &(i, w) in &stencil[1..] {
                acc += values[i].clone() * w;
            }
            acc
        })
        .collect())
}

/// Indices and second-derivative weights used at sample `k`: five-point
/// centered in the interior, three-point centered next to the ends and
/// four-point one-sided at the ends, all at least second order.
pub fn second_derivative_stencil(times: &[f64], k: usize) -> Vec<(usize, f64)> {
    let n = times.len();
    let idx: Vec<usize> = if n >= 5 && k >= 2 && k + 2 < n {
        (k - 2..=k + 2).collect()
    } else if k == 0 {
        vec![0, 1, 2, 3]
    } else if k == n - 1 {
        vec![n - 4, n - 3, n - 2, n - 1]
    } else {
        vec![k - 1, k, k + 1]
    };
    let nodes: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let w = fornberg_weights(times[k], &nodes, 2);
    idx.into_iter().zip(w.into_iter().map(|c| c[2])).collect()
}

/// Second time derivative of sampled values; needs at least four samples.
pub fn differentiate2<T>(times: &[f64], values: &[T]) -> Result<Vec<T>>
where
    T: Clone + AddAssign + Mul<f64, Output = T>,
{
    validate_grid(times, 4)?;
    if values.len() != times.len() {
        return Err(Error::Dimension { expected: times.len(), got: values.len() });
    }
    Ok((0..times.len())
        .map(|k| {
            let stencil = second_derivative_stencil(times, k);
            let mut acc = values[stencil[0].0].clone() * stencil[0].1;
            for &(i, w) in &stencil[1..] {
                acc += values[i].clone() * w;
            }
            acc
        })
        .collect())
}

/// Start index of the (up to) four-sample window around `t`.
fn window_start(times: &[f64], t: f64, width: usize) -> usize {
    let n = times.len();
    let width = width.min(n);
    let upper = times.partition_point(|s| *s <= t);
    let centre = upper.saturating_sub(1);
    centre.saturating_sub(width / 2 - 1).min(n - width)
}

/// Value and first derivative at `t` of the cubic through the four samples
/// nearest `t`.
pub fn interpolate<T>(times: &[f64], values: &[T], t: f64) -> (T, T)
where
    T: Clone + AddAssign + Mul<f64, Output = T>,
{
    assert!(!times.is_empty() && times.len() == values.len(), "interpolate: empty or mismatched samples");
    if times.len() == 1 {
        return (values[0].clone(), values[0].clone() * 0.0);
    }
    let start = window_start(times, t, 4);
    let end = (start + 4).min(times.len());
    let w = fornberg_weights(t, &times[start..end], 1);
    let mut val = values[start].clone() * w[0][0];
    let mut der = values[start].clone() * w[0][1];
    for (off, wk) in w.iter().enumerate().skip(1) {
        val += values[start + off].clone() * wk[0];
        der += values[start + off].clone() * wk[1];
    }
    (val, der)
}

/// Uniform grid `t0, t0 + h, ...` ending exactly at `t_end`; the last step is
/// shortened if `h` does not divide the span.
pub fn uniform_grid(t0: f64, t_end: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Grid(format!("step must be positive, got {h}")));
    }
    if !(t_end > t0) || !t_end.is_finite() || !t0.is_finite() {
        return Err(Error::Grid(format!("empty time interval [{t0}, {t_end}]")));
    }
    let steps = ((t_end - t0) / h - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| t0 + k as f64 * h).collect();
    times.push(t_end);
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_weights() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1: Vec<f64> = w.iter().map(|c| c[1]).collect();
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in d1.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let d0: Vec<f64> = w.iter().map(|c| c[0]).collect();
        assert_eq!(d0, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn differentiate_polynomials_exactly() {
        let times: Vec<f64> = (0..12).map(|k| 0.1 * k as f64 + 0.003 * (k as f64).powi(2)).collect();
        let cubic: Vec<f64> = times.iter().map(|t| 1.0 + 2.0 * t - t * t).collect();
        let d = differentiate(&times, &cubic).unwrap();
        for (t, v) in times.iter().zip(d) {
            assert!((v - (2.0 - 2.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_cubics() {
        let times: Vec<f64> = (0..9).map(|k| 0.2 * k as f64 + 0.01 * (k as f64).powi(2)).collect();
        let cubic: Vec<f64> = times.iter().map(|t| t * t * t - 2.0 * t * t).collect();
        let d = differentiate2(&times, &cubic).unwrap();
        for (k, (t, v)) in times.iter().zip(d).enumerate() {
            let tol = if k == 1 || k == times.len() - 2 { 0.1 } else { 1e-9 };
            assert!((v - (6.0 * t - 4.0)).abs() < tol, "k={k}");
        }
        assert!(differentiate2(&[0.0, 1.0, 2.0], &[0.0, 1.0, 4.0]).is_err());
    }

    #[test]
    fn interior_is_fourth_order() {
        let err = |h: f64| {
            let n = (2.0 / h).round() as usize + 1;
            let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
            let vals: Vec<f64> = times.iter().map(|t| t.sin()).collect();
            let d = differentiate(&times, &vals).unwrap();
            (d[n / 2] - 1f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(differentiate(&[0.0, 1.0], &[0.0, 1.0]), Err(Error::Grid(_))));
        assert!(matches!(differentiate(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]), Err(Error::Grid(_))));
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
        assert!(uniform_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn uniform_grid_hits_end() {
        let g = uniform_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = uniform_grid(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let times: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let vals: Vec<f64> = times.iter().map(|t| t * t * t - t).collect();
        for t in [0.0, 0.1, 1.3, 2.75, 3.5] {
            let (v, d) = interpolate(&times, &vals, t);
            assert!((v - (t * t * t - t)).abs() < 1e-12);
            assert!((d - (3.0 * t * t - 1.0)).abs() < 1e-11);
        }
    }
}
