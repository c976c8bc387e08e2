//! Comparison methods: one-step-ahead lasso regression and the graphical lasso.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::graph::{EdgeScores, EdgeSet};
use crate::lasso::{self, LassoOptions};
use crate::panel::TimeSeriesPanel;
use crate::topology::reconstruction_error;
use crate::{Error, Result};

pub const DEFAULT_REGRESSION_GAMMA: f64 = 1e-3;
pub const DEFAULT_GLASSO_LAMBDA: f64 = 0.05;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Lag-1 coefficients `h[j][i]` of `T_j(k)` on `T_i(k-1)`, self terms included.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub coefficients: DMatrix<f64>,
    pub gamma: f64,
    pub threshold: f64,
}

impl RegressionFit {
    /// Pair strength `max(|h_ji|, |h_ij|)`; self terms never count.
    pub fn scores(&self) -> EdgeScores {
        EdgeScores::from_directed(self.coefficients.nrows(), |j, i| self.coefficients[(j, i)])
    }

    pub fn edges(&self) -> EdgeSet {
        self.scores().edges_above(self.threshold)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")))
    }
}

/// Penalized least squares of each node on every node's previous sample.
pub fn fit_regression(panel: &TimeSeriesPanel, gamma: f64, threshold: f64) -> Result<RegressionFit> {
    check_threshold(threshold)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
    }
    let n = panel.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            available: n,
        });
    }
    let m = panel.node_count();
    let x = panel.centered();
    let pairs = (n - 1) as f64;
    let lagged_moment = |a: usize, b: usize, shift: usize| -> f64 {
        let (sa, sb) = (x.series(a), x.series(b));
        (0..n - 1).map(|k| sa[k] * sb[k + shift]).sum::<f64>() / pairs
    };
    let gram = DMatrix::from_fn(m, m, |a, b| lagged_moment(a, b, 0));
    let rows = (0..m)
        .into_par_iter()
        .map(|j| {
            let b: Vec<f64> = (0..m).map(|i| lagged_moment(i, j, 1)).collect();
            lasso::solve(&gram, &b, gamma, None, &LassoOptions::default())
                .map(|s| s.coefficients)
                .map_err(|e| Error::AtNode {
                    node: j + 1,
                    inner: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let coefficients = DMatrix::from_fn(m, m, |j, i| rows[j][i]);
    Ok(RegressionFit {
        coefficients,
        gamma,
        threshold,
    })
}

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub covariance: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub lambda: f64,
    pub threshold: f64,
    pub sweeps: usize,
}

impl GlassoFit {
    pub fn scores(&self) -> EdgeScores {
        EdgeScores::from_directed(self.precision.nrows(), |a, b| self.precision[(a, b)])
    }

    pub fn edges(&self) -> EdgeSet {
        self.scores().edges_above(self.threshold)
    }
}

/// Sample covariance of the panel's columns (divides by N).
pub fn sample_covariance(panel: &TimeSeriesPanel) -> DMatrix<f64> {
    let x = panel.centered();
    let m = panel.node_count();
    let n = panel.len() as f64;
    DMatrix::from_fn(m, m, |a, b| {
        x.series(a).iter().zip(x.series(b)).map(|(u, v)| u * v).sum::<f64>() / n
    })
}

pub fn fit_glasso(panel: &TimeSeriesPanel, lambda: f64, threshold: f64) -> Result<GlassoFit> {
    check_threshold(threshold)?;
    glasso(&sample_covariance(panel), lambda, threshold)
}

fn without(index: usize, m: usize) -> Vec<usize> {
    (0..m).filter(|&i| i != index).collect()
}

/// Block coordinate descent on the covariance estimate `W`, one column at a
/// time, starting from `S + lambda I`. Stops when no entry of `W` moves by
/// `1e-6` or more in a sweep.
pub fn glasso(covariance: &DMatrix<f64>, lambda: f64, threshold: f64) -> Result<GlassoFit> {
    const TOLERANCE: f64 = 1e-6;
    const MAX_SWEEPS: usize = 10_000;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let m = covariance.nrows();
    if m == 0 || !covariance.is_square() {
        return Err(Error::DimensionMismatch("covariance must be a non-empty square matrix".into()));
    }
    if (0..m).any(|j| !(covariance[(j, j)] >= 0.0)) {
        return Err(Error::InvalidParameter("covariance has a negative diagonal entry".into()));
    }
    let s = covariance;
    let mut w = s.clone();
    for j in 0..m {
        w[(j, j)] += lambda;
    }
    let options = LassoOptions::default();
    let mut betas = vec![vec![0.0; m.saturating_sub(1)]; m];
    let inner = |w: &DMatrix<f64>, j: usize, warm: &[f64]| -> Result<(Vec<usize>, DMatrix<f64>, Vec<f64>)> {
        let rest = without(j, m);
        let w11 = DMatrix::from_fn(m - 1, m - 1, |r, c| w[(rest[r], rest[c])]);
        let s12: Vec<f64> = rest.iter().map(|&r| s[(r, j)]).collect();
        // 1/2 b'W11 b - b's12 + lambda|b| is half of the lasso form with penalty 2 lambda.
        let beta = lasso::solve(&w11, &s12, 2.0 * lambda, Some(warm), &options)?.coefficients;
        Ok((rest, w11, beta))
    };

    let mut sweeps = 0;
    let mut converged = m == 1;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps });
        }
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            let (rest, w11, beta) = inner(&w, j, &betas[j])?;
            let w12 = &w11 * nalgebra::DVector::from_column_slice(&beta);
            for (r, &row) in rest.iter().enumerate() {
                max_change = max_change.max((w[(row, j)] - w12[r]).abs());
                w[(row, j)] = w12[r];
                w[(j, row)] = w12[r];
            }
            betas[j] = beta;
        }
        if !max_change.is_finite() {
            return Err(Error::SolverDiverged("graphical lasso produced non-finite entries".into()));
        }
        converged = max_change < TOLERANCE;
    }

    let mut theta = DMatrix::zeros(m, m);
    for j in 0..m {
        let (rest, _, beta) = if m > 1 {
            inner(&w, j, &betas[j])?
        } else {
            (Vec::new(), DMatrix::zeros(0, 0), Vec::new())
        };
        let w12_beta: f64 = rest.iter().zip(&beta).map(|(&r, b)| w[(r, j)] * b).sum();
        let tjj = 1.0 / (w[(j, j)] - w12_beta);
        theta[(j, j)] = tjj;
        for (&r, b) in rest.iter().zip(&beta) {
            theta[(r, j)] = -b * tjj;
        }
    }
    let precision = (&theta + theta.transpose()) / 2.0;
    Ok(GlassoFit {
        covariance: s.clone(),
        precision,
        lambda,
        threshold,
        sweeps,
    })
}

/// Lowest error over every threshold that changes the edge set.
pub fn best_over_threshold(scores: &EdgeScores, truth: &EdgeSet) -> Result<f64> {
    let mut cuts: Vec<f64> = scores.edges_above(f64::NEG_INFINITY).iter().map(|e| scores.score(e)).collect();
    cuts.push(f64::NEG_INFINITY);
    let mut best = f64::INFINITY;
    for t in cuts {
        best = best.min(reconstruction_error(&scores.edges_above(t), truth)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_inputs, NoisePlan};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_covariance_gives_diagonal_precision() {
        let fit = glasso(&DMatrix::identity(4, 4), 0.1, 0.05).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { 1.0 / 1.1 } else { 0.0 };
                assert!((fit.precision[(a, b)] - expect).abs() < 1e-12);
            }
        }
        assert!(fit.edges().is_empty());
    }

    fn sample_gaussian(precision: &DMatrix<f64>, n: usize, seed: u64) -> TimeSeriesPanel {
        let m = precision.nrows();
        let cov = precision.clone().try_inverse().unwrap();
        let l = cov.cholesky().unwrap().l();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut series = vec![Vec::with_capacity(n); m];
        for _ in 0..n {
            let z = nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            for j in 0..m {
                series[j].push(x[j]);
            }
        }
        TimeSeriesPanel::numbered(1.0, series).unwrap()
    }

    #[test]
    fn recovers_chain_precision_support() {
        let theta = DMatrix::from_row_slice(3, 3, &[2.0, -0.8, 0.0, -0.8, 2.0, -0.8, 0.0, -0.8, 2.0]);
        let panel = sample_gaussian(&theta, 100_000, 5);
        let fit = fit_glasso(&panel, 0.05, 0.05).unwrap();
        assert_eq!(fit.edges(), EdgeSet::from_pairs([(0, 1), (1, 2)]));
        assert!(fit.precision.clone().cholesky().is_some());
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let panel = generate_inputs(&NoisePlan::white(4, 1.0, 2), 4, 2000).unwrap();
        let fit = fit_glasso(&panel, 10.0, 1e-9).unwrap();
        for a in 0..4 {
            for b in (0..4).filter(|&b| b != a) {
                assert_eq!(fit.precision[(a, b)], 0.0);
            }
        }
        assert!(fit.edges().is_empty());
    }

    #[test]
    fn precision_stays_positive_definite() {
        let theta = DMatrix::from_row_slice(3, 3, &[2.0, -0.8, 0.3, -0.8, 2.0, -0.8, 0.3, -0.8, 2.0]);
        let panel = sample_gaussian(&theta, 500, 9);
        for lambda in [1e-3, 0.01, 0.05, 0.2, 1.0] {
            let fit = fit_glasso(&panel, lambda, 0.05).unwrap();
            assert!(fit.precision.clone().cholesky().is_some(), "lambda {lambda}");
            assert_eq!(fit.precision, fit.precision.transpose());
        }
    }

    #[test]
    fn independent_series_have_no_regression_edges() {
        let panel = generate_inputs(&NoisePlan::white(5, 1.0, 17), 5, 100_000).unwrap();
        let fit = fit_regression(&panel, DEFAULT_REGRESSION_GAMMA, DEFAULT_THRESHOLD).unwrap();
        assert!(fit.edges().is_empty());
    }

    #[test]
    fn regression_recovers_transition_matrix() {
        let net = crate::network::presets::five_zone();
        let d = net.discretize(1.0).unwrap();
        let panel = crate::simulate::simulate(&d, &net.labels(), &NoisePlan::white(5, 1.0, 3), 50_000, 1000).unwrap();
        let fit = fit_regression(&panel, 0.0, DEFAULT_THRESHOLD).unwrap();
        assert!((&fit.coefficients - d.matrix()).abs().max() < 0.02);
    }

    #[test]
    fn regression_is_repeatable() {
        let panel = generate_inputs(&NoisePlan::ar1(3, 0.5, 1.0, 1), 3, 5000).unwrap();
        let a = fit_regression(&panel, 0.01, 0.05).unwrap();
        let b = fit_regression(&panel, 0.01, 0.05).unwrap();
        assert!((&a.coefficients - &b.coefficients).abs().max() < 1e-8);
        assert!(fit_regression(&panel, 0.01, 0.0).is_err());
        let one = TimeSeriesPanel::numbered(1.0, vec![vec![1.0]]).unwrap();
        assert!(matches!(fit_regression(&one, 0.0, 0.1), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn best_threshold_finds_exact_cut() {
        let w = [[0.0, 0.9, 0.2], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]];
        let scores = EdgeScores::from_directed(3, |a, b| w[a][b]);
        let truth = EdgeSet::from_pairs([(0, 1), (1, 2)]);
        assert_eq!(best_over_threshold(&scores, &truth).unwrap(), 0.0);
    }
}
