//! Error-versus-sample-size sweeps over methods, input types and seeds.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{BaselineConfig, InputKind, LearnConfig, Method, SweepConfig};
use crate::baselines::{best_over_threshold, fit_glasso, fit_regression};
use crate::graph::EdgeSet;
use crate::network::DiscreteDynamics;
use crate::panel::TimeSeriesPanel;
use crate::simulate::{simulate, NoisePlan};
use crate::topology::{default_gamma, learn_topology, reconstruction_error};
use crate::{Error, Result};

/// Everything a trial needs apart from its coordinates.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dynamics: DiscreteDynamics,
    pub labels: Vec<String>,
    pub truth: EdgeSet,
    pub burn_in: usize,
    pub variance: f64,
    pub ar_coefficient: f64,
    pub learn: LearnConfig,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Error at the configured thresholds.
    pub error: f64,
    /// Lowest error over all thresholds; baselines only.
    pub best_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub method: Method,
    pub input: InputKind,
    pub samples: usize,
    pub seed: u64,
    pub outcome: std::result::Result<TrialOutcome, String>,
    pub seconds: f64,
}

impl Experiment {
    pub fn plan(&self, input: InputKind, seed: u64) -> NoisePlan {
        let m = self.labels.len();
        match input {
            InputKind::White => NoisePlan::white(m, self.variance, seed),
            InputKind::Ar1 => NoisePlan::ar1(m, self.ar_coefficient, self.variance, seed),
        }
    }

    pub fn panel(&self, input: InputKind, samples: usize, seed: u64) -> Result<TimeSeriesPanel> {
        simulate(&self.dynamics, &self.labels, &self.plan(input, seed), samples, self.burn_in)
    }

    /// Runs one method on an already simulated panel.
    pub fn evaluate(&self, method: Method, panel: &TimeSeriesPanel) -> Result<TrialOutcome> {
        let m = panel.node_count();
        let n = panel.len();
        match method {
            Method::Wiener | Method::WienerL1 => {
                let mut params = self.learn.params(m, n);
                params.gamma = if method == Method::Wiener {
                    0.0
                } else {
                    default_gamma(m, params.lag_order, n)
                };
                let est = learn_topology(panel, &params)?;
                Ok(TrialOutcome {
                    error: reconstruction_error(&est.edges, &self.truth)?,
                    best_error: None,
                })
            }
            Method::Regression => {
                let fit = fit_regression(panel, self.baseline.regression_gamma, self.baseline.threshold)?;
                Ok(TrialOutcome {
                    error: reconstruction_error(&fit.edges(), &self.truth)?,
                    best_error: Some(best_over_threshold(&fit.scores(), &self.truth)?),
                })
            }
            Method::Glasso => {
                let fit = fit_glasso(panel, self.baseline.glasso_lambda, self.baseline.threshold)?;
                Ok(TrialOutcome {
                    error: reconstruction_error(&fit.edges(), &self.truth)?,
                    best_error: Some(best_over_threshold(&fit.scores(), &self.truth)?),
                })
            }
        }
    }

    /// Simulates once per `(input, samples, seed)` and evaluates every method on
    /// that panel. Failures are kept as rows; the sweep never aborts.
    pub fn sweep(&self, config: &SweepConfig) -> Result<Vec<SweepRow>> {
        let cells: Vec<(InputKind, usize, u64)> = config
            .inputs
            .iter()
            .flat_map(|&input| {
                config.samples.iter().flat_map(move |&n| {
                    config.resolved_seeds().into_iter().map(move |seed| (input, n, seed))
                })
            })
            .collect();
        let run = || -> Vec<SweepRow> {
            cells
                .par_iter()
                .flat_map_iter(|&(input, samples, seed)| {
                    let panel = self.panel(input, samples, seed);
                    config.methods.iter().map(move |&method| {
                        let start = Instant::now();
                        let outcome = match &panel {
                            Ok(p) => self.evaluate(method, p).map_err(|e| e.to_string()),
                            Err(e) => Err(format!("simulation failed: {e}")),
                        };
                        SweepRow {
                            method,
                            input,
                            samples,
                            seed,
                            outcome,
                            seconds: start.elapsed().as_secs_f64(),
                        }
                    })
                    .collect::<Vec<_>>()
                })
                .collect()
        };
        let mut rows = if config.workers == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", config.workers)))?
                .install(run)
        };
        rows.sort_by_key(|r| (r.method, r.input, r.samples, r.seed));
        Ok(rows)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: Method,
    pub input: InputKind,
    pub samples: usize,
    pub trials: usize,
    pub failures: usize,
    pub median_error: Option<f64>,
    pub median_best_error: Option<f64>,
    pub exact_recoveries: usize,
}

/// Medians per `(method, input, samples)` over successful trials.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, InputKind, usize)> = rows.iter().map(|r| (r.method, r.input, r.samples)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, input, samples)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.method == method && r.input == input && r.samples == samples)
                .collect();
            let ok: Vec<&TrialOutcome> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let mut errors: Vec<f64> = ok.iter().map(|o| o.error).collect();
            let mut best: Vec<f64> = ok.iter().filter_map(|o| o.best_error).collect();
            SummaryRow {
                method,
                input,
                samples,
                trials: group.len(),
                failures: group.len() - ok.len(),
                exact_recoveries: errors.iter().filter(|&&e| e == 0.0).count(),
                median_error: median(&mut errors),
                median_best_error: median(&mut best),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::presets;

    fn experiment() -> Experiment {
        let net = presets::five_zone();
        Experiment {
            dynamics: net.discretize(1.0).unwrap(),
            labels: net.labels(),
            truth: net.true_edge_set(),
            burn_in: 200,
            variance: 1.0,
            ar_coefficient: 0.5,
            learn: LearnConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }

    #[test]
    fn row_count_is_the_full_product() {
        let config = SweepConfig {
            samples: vec![1100, 1200],
            trials: 3,
            ..SweepConfig::default()
        };
        let rows = experiment().sweep(&config).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 4 * 2);
        assert_eq!(summarize(&rows).len(), 2 * 4 * 2);
    }

    #[test]
    fn failures_are_rows_not_aborts() {
        let config = SweepConfig {
            samples: vec![50],
            trials: 1,
            methods: vec![Method::Wiener, Method::Regression],
            inputs: vec![InputKind::White],
            ..SweepConfig::default()
        };
        let rows = experiment().sweep(&config).unwrap();
        assert!(rows[0].outcome.is_err());
        assert!(rows[1].outcome.is_ok());
        let summary = summarize(&rows);
        assert_eq!(summary[0].failures, 1);
        assert_eq!(summary[0].median_error, None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
