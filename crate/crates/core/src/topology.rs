//! Topology recovery from Wiener filter responses.
//!
//! 1. Fit a two-sided filter for every ordered pair.
//! 2. Keep the pair `(l, p)` when either direction's peak response exceeds `rho`
//!    (the moral graph: true edges plus nodes sharing a neighbour).
//! 3. Drop a kept pair when both directions have phase within `tau` of pi at
//!    every frequency where the response is non-negligible. Strict two-hop
//!    pairs have phase exactly pi; true neighbours generically do not.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::graph::{Edge, EdgeScores, EdgeSet};
use crate::panel::TimeSeriesPanel;
use crate::wiener::{fit_all, FilterBank, FrequencyGrid};
use crate::{Error, Result};

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnParams {
    /// Largest lag magnitude `F`; filters span `-F..=F`.
    pub lag_order: usize,
    /// L1 penalty on filter taps; 0 solves plain least squares.
    pub gamma: f64,
    /// Moral-graph threshold on the peak response magnitude.
    pub rho: f64,
    /// Allowed distance of the phase from pi, in radians.
    pub tau: f64,
    /// Phase is only inspected where `|W| > magnitude_floor * peak |W|`.
    pub magnitude_floor: f64,
    pub grid_points: usize,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            lag_order: 10,
            gamma: 0.0,
            rho: 0.05,
            tau: 0.5,
            magnitude_floor: 0.5,
            grid_points: 64,
        }
    }
}

impl LearnParams {
    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rho", self.rho)?;
        positive("tau", self.tau)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.magnitude_floor) {
            return Err(Error::InvalidParameter(format!(
                "magnitude floor must lie in [0, 1), got {}",
                self.magnitude_floor
            )));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidParameter("grid needs at least one frequency".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::uniform(self.grid_points)
    }
}

/// Penalty used for short panels: `0.1 * sqrt(ln(m (2F + 1)) / N)`.
pub fn default_gamma(node_count: usize, lag_order: usize, samples: usize) -> f64 {
    let p = (node_count * (2 * lag_order + 1)) as f64;
    0.1 * (p.ln().max(0.0) / samples as f64).sqrt()
}

/// Complex responses of every ordered pair on a common grid.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    grid: FrequencyGrid,
    /// `values[target][source][k]`; empty when `target == source`.
    values: Vec<Vec<Vec<C64>>>,
}

impl ResponseTable {
    pub fn new(grid: FrequencyGrid, values: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        let m = values.len();
        for (j, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!("response row {} has {} entries", j + 1, row.len())));
            }
            for (i, v) in row.iter().enumerate() {
                let expected = if i == j { 0 } else { grid.len() };
                if v.len() != expected {
                    return Err(Error::DimensionMismatch(format!(
                        "pair ({},{}) has {} responses for {} frequencies",
                        j + 1,
                        i + 1,
                        v.len(),
                        grid.len()
                    )));
                }
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_bank(bank: &FilterBank, grid: &FrequencyGrid) -> Self {
        let m = bank.node_count();
        let values = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| {
                        if i == j {
                            Vec::new()
                        } else {
                            bank.freq_response(j, i, grid).expect("pair exists")
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn response(&self, target: usize, source: usize) -> &[C64] {
        &self.values[target][source]
    }

    pub fn h_inf(&self, target: usize, source: usize) -> f64 {
        self.values[target][source].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scores(&self) -> EdgeScores {
        EdgeScores::from_directed(self.node_count(), |j, i| self.h_inf(j, i))
    }

    /// Relabels nodes so that `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.node_count();
        let mut values = vec![vec![Vec::new(); m]; m];
        for j in 0..m {
            for i in 0..m {
                values[perm[j]][perm[i]] = self.values[j][i].clone();
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Phase summary of one ordered pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairDiagnostics {
    pub target: usize,
    pub source: usize,
    pub h_inf: f64,
    pub magnitude: Vec<f64>,
    /// Angle in `(-pi, pi]` at each grid frequency.
    pub phase: Vec<f64>,
    /// Frequencies where the magnitude clears the floor.
    pub retained: Vec<bool>,
    /// Smallest and largest `|phase|` over retained frequencies.
    pub min_abs_phase: Option<f64>,
    pub max_abs_phase: Option<f64>,
    /// `|phase| >= pi - tau` at every retained frequency.
    pub phase_near_pi: bool,
}

pub fn pair_diagnostics(table: &ResponseTable, target: usize, source: usize, tau: f64, magnitude_floor: f64) -> PairDiagnostics {
    let resp = table.response(target, source);
    let magnitude: Vec<f64> = resp.iter().map(|z| z.norm()).collect();
    let phase: Vec<f64> = resp.iter().map(|z| z.arg()).collect();
    let h_inf = magnitude.iter().cloned().fold(0.0, f64::max);
    let retained: Vec<bool> = magnitude.iter().map(|&a| a > magnitude_floor * h_inf).collect();
    let abs_kept: Vec<f64> = phase
        .iter()
        .zip(&retained)
        .filter(|(_, &r)| r)
        .map(|(p, _)| p.abs())
        .collect();
    let min_abs_phase = abs_kept.iter().cloned().reduce(f64::min);
    let max_abs_phase = abs_kept.iter().cloned().reduce(f64::max);
    let phase_near_pi = abs_kept.iter().all(|&p| PI - tau <= p);
    PairDiagnostics {
        target,
        source,
        h_inf,
        magnitude,
        phase,
        retained,
        min_abs_phase,
        max_abs_phase,
        phase_near_pi,
    }
}

/// Pairs whose peak response, in either direction, strictly exceeds `rho`.
pub fn moral_graph(table: &ResponseTable, rho: f64) -> EdgeSet {
    table.scores().edges_above(rho)
}

pub fn moral_graph_from_bank(bank: &FilterBank, grid: &FrequencyGrid, rho: f64) -> EdgeSet {
    moral_graph(&ResponseTable::from_bank(bank, grid), rho)
}

#[derive(Debug, Clone)]
pub struct EdgeDecision {
    pub edge: Edge,
    pub pruned: bool,
    pub reason: String,
}

/// Removes moral edges whose phase sits near pi in both directions.
/// Returns the surviving edges and one decision per moral edge.
pub fn prune_two_hop(
    moral: &EdgeSet,
    table: &ResponseTable,
    tau: f64,
    magnitude_floor: f64,
) -> (EdgeSet, Vec<EdgeDecision>) {
    let mut kept = EdgeSet::new();
    let mut decisions = Vec::with_capacity(moral.len());
    for edge in moral {
        let (a, b) = edge.endpoints();
        let ab = pair_diagnostics(table, a, b, tau, magnitude_floor);
        let ba = pair_diagnostics(table, b, a, tau, magnitude_floor);
        let describe = |d: &PairDiagnostics| match d.min_abs_phase {
            Some(p) => format!("min |phase| of W({},{}) is {p:.4}", d.target + 1, d.source + 1),
            None => format!("W({},{}) has no frequency above the floor", d.target + 1, d.source + 1),
        };
        let (pruned, reason) = if ab.phase_near_pi && ba.phase_near_pi {
            (
                true,
                format!("phase within {tau} of pi in both directions ({}; {})", describe(&ab), describe(&ba)),
            )
        } else {
            let off = if ab.phase_near_pi { &ba } else { &ab };
            (false, format!("phase leaves the band around pi ({})", describe(off)))
        };
        if !pruned {
            kept.insert(edge);
        }
        decisions.push(EdgeDecision { edge, pruned, reason });
    }
    (kept, decisions)
}

/// Size of the symmetric difference divided by the number of true edges.
pub fn reconstruction_error(estimated: &EdgeSet, truth: &EdgeSet) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    Ok(estimated.symmetric_difference_len(truth) as f64 / truth.len() as f64)
}

#[derive(Debug, Clone)]
pub struct GraphEstimate {
    pub labels: Vec<String>,
    pub moral_edges: EdgeSet,
    /// Moral edges that survived phase pruning.
    pub edges: EdgeSet,
    pub pairs: Vec<PairDiagnostics>,
    pub decisions: Vec<EdgeDecision>,
    pub params: LearnParams,
    pub error: Option<f64>,
}

#[derive(Serialize)]
struct EstimateDocument<'a> {
    labels: &'a [String],
    params: &'a LearnParams,
    moral_edges: Vec<(String, String)>,
    edges: Vec<(String, String)>,
    pairs: Vec<PairSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<f64>,
}

#[derive(Serialize)]
struct PairSummary {
    target: String,
    source: String,
    h_inf: f64,
    min_abs_phase: Option<f64>,
    max_abs_phase: Option<f64>,
    in_moral_graph: bool,
    pruned: bool,
    reason: Option<String>,
}

impl GraphEstimate {
    pub fn from_table(table: &ResponseTable, labels: Vec<String>, params: &LearnParams) -> Self {
        let moral_edges = moral_graph(table, params.rho);
        let (edges, decisions) = prune_two_hop(&moral_edges, table, params.tau, params.magnitude_floor);
        let m = table.node_count();
        let pairs = (0..m)
            .flat_map(|j| (0..m).filter(move |&i| i != j).map(move |i| (j, i)))
            .map(|(j, i)| pair_diagnostics(table, j, i, params.tau, params.magnitude_floor))
            .collect();
        Self {
            labels,
            moral_edges,
            edges,
            pairs,
            decisions,
            params: params.clone(),
            error: None,
        }
    }

    /// Scores the estimate against a known edge set.
    pub fn score(&mut self, truth: &EdgeSet) -> Result<f64> {
        let e = reconstruction_error(&self.edges, truth)?;
        self.error = Some(e);
        Ok(e)
    }

    pub fn decision(&self, edge: Edge) -> Option<&EdgeDecision> {
        self.decisions.iter().find(|d| d.edge == edge)
    }

    fn label_pair(&self, e: Edge) -> (String, String) {
        let (a, b) = e.endpoints();
        (self.labels[a].clone(), self.labels[b].clone())
    }

    pub fn to_json(&self) -> String {
        let pairs = self
            .pairs
            .iter()
            .map(|p| {
                let edge = Edge::new(p.target, p.source);
                let decision = self.decision(edge);
                PairSummary {
                    target: self.labels[p.target].clone(),
                    source: self.labels[p.source].clone(),
                    h_inf: p.h_inf,
                    min_abs_phase: p.min_abs_phase,
                    max_abs_phase: p.max_abs_phase,
                    in_moral_graph: self.moral_edges.contains(edge),
                    pruned: decision.is_some_and(|d| d.pruned),
                    reason: decision.map(|d| d.reason.clone()),
                }
            })
            .collect();
        let doc = EstimateDocument {
            labels: &self.labels,
            params: &self.params,
            moral_edges: self.moral_edges.iter().map(|e| self.label_pair(e)).collect(),
            edges: self.edges.iter().map(|e| self.label_pair(e)).collect(),
            pairs,
            error: self.error,
        };
        serde_json::to_string_pretty(&doc).expect("estimate serializes")
    }
}

/// Fits all filters, builds the moral graph and prunes two-hop pairs.
pub fn learn_topology(panel: &TimeSeriesPanel, params: &LearnParams) -> Result<GraphEstimate> {
    params.check()?;
    let grid = params.grid()?;
    let bank = fit_all(panel, params.lag_order, params.gamma)?;
    Ok(estimate_from_bank(&bank, &grid, params))
}

pub fn estimate_from_bank(bank: &FilterBank, grid: &FrequencyGrid, params: &LearnParams) -> GraphEstimate {
    let table = ResponseTable::from_bank(bank, grid);
    GraphEstimate::from_table(&table, bank.labels().to_vec(), params)
}
