//! Cyclic coordinate descent for L1-penalized quadratics in Gram form:
//!
//! ```text
//! minimize  h'Gh - 2b'h + penalty * |h|_1
//! ```
//!
//! `G` is a symmetric positive semi-definite Gram (or covariance) matrix and
//! `b` the matching cross-moment vector. Least squares with an L1 penalty on
//! centered data reduces to this form after dividing by the sample count.

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    /// Stop once the largest coefficient change in a sweep falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    /// Objective after each sweep; entry 0 is the starting point.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn objective(gram: &DMatrix<f64>, rhs: &[f64], penalty: f64, h: &[f64]) -> f64 {
    let p = rhs.len();
    let mut quad = 0.0;
    for k in 0..p {
        let col = gram.column(k);
        let gh: f64 = (0..p).map(|l| col[l] * h[l]).sum();
        quad += h[k] * gh;
    }
    let lin: f64 = rhs.iter().zip(h).map(|(b, x)| b * x).sum();
    let l1: f64 = h.iter().map(|x| x.abs()).sum();
    quad - 2.0 * lin + penalty * l1
}

/// Runs coordinate descent from `warm` (or zero).
///
/// Each sweep is checked for a non-increasing objective; an increase beyond
/// rounding, or a non-finite objective, is reported as
/// [`Error::SolverDiverged`]. Hitting `max_sweeps` is not an error: the
/// solution comes back with `converged == false`.
pub fn solve(
    gram: &DMatrix<f64>,
    rhs: &[f64],
    penalty: f64,
    warm: Option<&[f64]>,
    options: &LassoOptions,
) -> Result<LassoSolution> {
    let p = rhs.len();
    if gram.nrows() != p || gram.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} Gram matrix for {p} coefficients",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if !(penalty >= 0.0) {
        return Err(Error::InvalidParameter(format!("penalty {penalty} is negative")));
    }
    let mut h = match warm {
        Some(w) if w.len() == p => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!(
                "warm start has {} coefficients, expected {p}",
                w.len()
            )))
        }
        None => vec![0.0; p],
    };
    // r = b - G h, kept current after every coordinate update.
    let mut r = rhs.to_vec();
    for (l, &hl) in h.iter().enumerate() {
        if hl != 0.0 {
            for (rk, g) in r.iter_mut().zip(gram.column(l).iter()) {
                *rk -= g * hl;
            }
        }
    }
    // With r = b - Gh the objective is -h'(b + r) + penalty*|h|.
    let current = |h: &[f64], r: &[f64]| -> f64 {
        let smooth: f64 = h.iter().zip(rhs).zip(r).map(|((x, b), rr)| -x * (b + rr)).sum();
        smooth + penalty * h.iter().map(|x| x.abs()).sum::<f64>()
    };

    let half = penalty / 2.0;
    let mut trace = vec![current(&h, &r)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for k in 0..p {
            let gkk = gram[(k, k)];
            if gkk <= 0.0 {
                continue;
            }
            let old = h[k];
            let partial = r[k] + gkk * old;
            let new = soft_threshold(partial, half) / gkk;
            let delta = new - old;
            if delta != 0.0 {
                h[k] = new;
                for (rl, g) in r.iter_mut().zip(gram.column(k).iter()) {
                    *rl -= g * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        let obj = current(&h, &r);
        let prev = *trace.last().unwrap();
        if !obj.is_finite() {
            return Err(Error::SolverDiverged(format!("objective became {obj} in sweep {sweeps}")));
        }
        if obj > prev + 1e-9 * prev.abs().max(1.0) {
            return Err(Error::SolverDiverged(format!(
                "objective rose from {prev} to {obj} in sweep {sweeps}"
            )));
        }
        trace.push(obj);
        if max_change < options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(LassoSolution {
        coefficients: h,
        sweeps,
        objective_trace: trace,
        converged,
    })
}
