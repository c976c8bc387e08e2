//! Input generation and state rollout of `T(k+1) = A T(k) + P(k)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::network::DiscreteDynamics;
use crate::panel::TimeSeriesPanel;
use crate::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 1000;

/// Temporal coloring applied to a node's white Gaussian driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Coloring {
    White,
    /// `x(k) = a x(k-1) + e(k)`.
    Ar1 { coefficient: f64 },
    /// `x(k) = sum_l b[l] e(k-l)`.
    Fir { taps: Vec<f64> },
}

impl Coloring {
    fn check(&self, node: usize) -> Result<()> {
        match self {
            Coloring::White => Ok(()),
            Coloring::Ar1 { coefficient } => {
                if coefficient.is_finite() && coefficient.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::NonStationaryFilter {
                        node: node + 1,
                        coefficient: *coefficient,
                    })
                }
            }
            Coloring::Fir { taps } => {
                if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) || taps.iter().all(|&t| t == 0.0) {
                    Err(Error::InvalidParameter(format!(
                        "FIR coloring at node {} needs finite taps, not all zero",
                        node + 1
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Power gain `|G(e^{iw})|^2` of the coloring filter.
    pub fn gain(&self, omega: f64) -> f64 {
        match self {
            Coloring::White => 1.0,
            Coloring::Ar1 { coefficient: a } => 1.0 / (1.0 - 2.0 * a * omega.cos() + a * a),
            Coloring::Fir { taps } => {
                let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (l, b)| {
                    let phase = omega * l as f64;
                    (re + b * phase.cos(), im - b * phase.sin())
                });
                re * re + im * im
            }
        }
    }

    /// Smallest power gain over 257 points of `[0, pi]`.
    pub fn min_gain(&self) -> f64 {
        (0..=256)
            .map(|k| self.gain(PI * k as f64 / 256.0))
            .fold(f64::INFINITY, f64::min)
    }

    fn warm_up(&self) -> usize {
        match self {
            Coloring::White => 0,
            Coloring::Ar1 { coefficient: a } if *a == 0.0 => 0,
            Coloring::Ar1 { coefficient: a } => {
                let decay = (-30.0 / a.abs().ln()).ceil() as usize;
                decay.max(100)
            }
            Coloring::Fir { taps } => taps.len() - 1,
        }
    }
}

/// Per-node input specification: white variance, coloring and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub variances: Vec<f64>,
    pub colorings: Vec<Coloring>,
    pub seed: u64,
}

impl NoisePlan {
    pub fn uniform(m: usize, variance: f64, coloring: Coloring, seed: u64) -> Self {
        Self {
            variances: vec![variance; m],
            colorings: vec![coloring; m],
            seed,
        }
    }

    pub fn white(m: usize, variance: f64, seed: u64) -> Self {
        Self::uniform(m, variance, Coloring::White, seed)
    }

    pub fn ar1(m: usize, coefficient: f64, variance: f64, seed: u64) -> Self {
        Self::uniform(m, variance, Coloring::Ar1 { coefficient }, seed)
    }

    pub fn node_count(&self) -> usize {
        self.variances.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn check(&self) -> Result<()> {
        if self.variances.len() != self.colorings.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} variances but {} colorings",
                self.variances.len(),
                self.colorings.len()
            )));
        }
        for (j, (&v, c)) in self.variances.iter().zip(&self.colorings).enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "input variance at node {} must be positive, got {v}",
                    j + 1
                )));
            }
            c.check(j)?;
        }
        Ok(())
    }

    /// Input power spectral density of `node` at angular frequency `omega`.
    pub fn spectrum(&self, node: usize, omega: f64) -> f64 {
        self.variances[node] * self.colorings[node].gain(omega)
    }

    /// Stationary variance of the colored input at `node`.
    pub fn input_variance(&self, node: usize) -> f64 {
        let s = self.variances[node];
        match &self.colorings[node] {
            Coloring::White => s,
            Coloring::Ar1 { coefficient: a } => s / (1.0 - a * a),
            Coloring::Fir { taps } => s * taps.iter().map(|b| b * b).sum::<f64>(),
        }
    }
}

fn node_stream(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

fn colored_series(plan: &NoisePlan, node: usize, n: usize) -> Vec<f64> {
    let mut rng = node_stream(plan.seed, node);
    let sd = plan.variances[node].sqrt();
    let coloring = &plan.colorings[node];
    let warm = coloring.warm_up();
    let mut white = (0..n + warm).map(|_| sd * rng.sample::<f64, _>(StandardNormal));
    match coloring {
        Coloring::White => white.collect(),
        Coloring::Ar1 { coefficient: a } => {
            let mut x = 0.0;
            let mut out = Vec::with_capacity(n);
            for (k, e) in white.enumerate() {
                x = a * x + e;
                if k >= warm {
                    out.push(x);
                }
            }
            out
        }
        Coloring::Fir { taps } => {
            let e: Vec<f64> = white.by_ref().collect();
            (warm..n + warm)
                .map(|k| taps.iter().enumerate().map(|(l, b)| b * e[k - l]).sum())
                .collect()
        }
    }
}

/// Draws `n` samples of every node's input. Node `j` uses stream `j` of a
/// ChaCha generator keyed by the plan's seed, so nodes are independent and
/// adding nodes never changes existing streams.
pub fn generate_inputs(plan: &NoisePlan, m: usize, n: usize) -> Result<TimeSeriesPanel> {
    plan.check()?;
    if plan.node_count() != m {
        return Err(Error::DimensionMismatch(format!(
            "noise plan covers {} nodes, network has {m}",
            plan.node_count()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let series = (0..m).map(|j| colored_series(plan, j, n)).collect();
    TimeSeriesPanel::numbered(1.0, series)
}

/// Iterates `T(k+1) = A T(k) + P(k)` from `T(0) = 0` and returns
/// `T(burn_in + 1), ..., T(N)`.
pub fn rollout(dynamics: &DiscreteDynamics, inputs: &TimeSeriesPanel, burn_in: usize) -> Result<TimeSeriesPanel> {
    let m = dynamics.node_count();
    if inputs.node_count() != m {
        return Err(Error::DimensionMismatch(format!(
            "inputs have {} rows, dynamics have {m} nodes",
            inputs.node_count()
        )));
    }
    let n = inputs.len();
    if burn_in >= n {
        return Err(Error::DimensionMismatch(format!(
            "burn-in {burn_in} leaves no samples out of {n}"
        )));
    }
    let a = dynamics.matrix();
    let rows: Vec<Vec<f64>> = (0..m).map(|j| (0..m).map(|i| a[(j, i)]).collect()).collect();
    let mut state = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut out = vec![Vec::with_capacity(n - burn_in); m];
    for k in 0..n {
        for j in 0..m {
            let drift: f64 = rows[j].iter().zip(&state).map(|(a, t)| a * t).sum();
            next[j] = drift + inputs.value(j, k);
        }
        std::mem::swap(&mut state, &mut next);
        if k >= burn_in {
            for j in 0..m {
                out[j].push(state[j]);
            }
        }
    }
    for v in out.iter().flatten() {
        if !v.is_finite() {
            return Err(Error::UnstableDiscretization(
                "state diverged during rollout".into(),
            ));
        }
    }
    TimeSeriesPanel::new(inputs.labels().to_vec(), dynamics.dt(), out)
}

/// Draws inputs and rolls out `n` retained samples after `burn_in` discarded ones.
pub fn simulate(
    dynamics: &DiscreteDynamics,
    labels: &[String],
    plan: &NoisePlan,
    n: usize,
    burn_in: usize,
) -> Result<TimeSeriesPanel> {
    let m = dynamics.node_count();
    if labels.len() != m {
        return Err(Error::DimensionMismatch(format!("{} labels for {m} nodes", labels.len())));
    }
    let inputs = generate_inputs(plan, m, n + burn_in)?;
    let inputs = TimeSeriesPanel::new(labels.to_vec(), dynamics.dt(), inputs.all_series().to_vec())?;
    rollout(dynamics, &inputs, burn_in)
}

/// Autocovariance of an input sequence at lag `lag` implied by its spectrum,
/// computed in closed form.
pub fn input_autocovariance(plan: &NoisePlan, node: usize, lag: usize) -> f64 {
    let s = plan.variances[node];
    match &plan.colorings[node] {
        Coloring::White => {
            if lag == 0 {
                s
            } else {
                0.0
            }
        }
        Coloring::Ar1 { coefficient: a } => s * a.powi(lag as i32) / (1.0 - a * a),
        Coloring::Fir { taps } => {
            s * (lag..taps.len()).map(|l| taps[l] * taps[l - lag]).sum::<f64>()
        }
    }
}
