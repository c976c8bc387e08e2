//! Exact Wiener filters of a known linear network, evaluated per frequency.
//!
//! With `z = e^{iw}`, `S_j = z - a_jj` and `H_ji = a_ji / S_j`, each node obeys
//! `T_j = sum_i H_ji T_i + E_j` where `E_j = P_j / S_j` has spectrum
//! `Phi_p_j / |S_j|^2`. The inverse temperature spectrum is then
//! `K = (I - H)^* Phi_E^{-1} (I - H)`, and the best two-sided linear predictor
//! of `T_j` from the other nodes has response `W_ji = -K_ji / K_jj`.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::graph::EdgeSet;
use crate::network::DiscreteDynamics;
use crate::simulate::NoisePlan;
use crate::topology::ResponseTable;
use crate::wiener::FrequencyGrid;
use crate::{Error, Result};

type C64 = Complex<f64>;

/// Condition number of `I - H` above which a frequency is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct ZDomainModel {
    a: DMatrix<f64>,
    plan: NoisePlan,
}

impl ZDomainModel {
    pub fn new(dynamics: &DiscreteDynamics, plan: NoisePlan) -> Result<Self> {
        Self::from_matrix(dynamics.matrix().clone(), plan)
    }

    pub fn from_matrix(a: DMatrix<f64>, plan: NoisePlan) -> Result<Self> {
        if !a.is_square() || a.nrows() != plan.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} transition matrix with a {}-node noise plan",
                a.nrows(),
                a.ncols(),
                plan.node_count()
            )));
        }
        plan.check()?;
        Ok(Self { a, plan })
    }

    pub fn node_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn plan(&self) -> &NoisePlan {
        &self.plan
    }

    /// Undirected support of the off-diagonal entries.
    pub fn support(&self) -> EdgeSet {
        let m = self.node_count();
        let mut out = EdgeSet::new();
        for j in 0..m {
            for i in j + 1..m {
                if self.a[(j, i)] != 0.0 || self.a[(i, j)] != 0.0 {
                    out.insert(crate::Edge::new(i, j));
                }
            }
        }
        out
    }

    fn input_spectra(&self, omega: f64) -> Result<Vec<f64>> {
        (0..self.node_count())
            .map(|j| {
                let s = self.plan.spectrum(j, omega);
                if s > 0.0 && s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "input spectrum of node {} is {s} at frequency {omega}",
                        j + 1
                    )))
                }
            })
            .collect()
    }

    fn diagonal_terms(&self, omega: f64) -> Vec<C64> {
        let z = C64::from_polar(1.0, omega);
        (0..self.node_count()).map(|j| z - self.a[(j, j)]).collect()
    }
}

fn condition_number(matrix: &DMatrix<C64>) -> f64 {
    let sv = matrix.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse temperature spectral density at one frequency (Hermitian).
pub fn analytic_spectrum_inverse(model: &ZDomainModel, omega: f64) -> Result<DMatrix<C64>> {
    let m = model.node_count();
    let s = model.diagonal_terms(omega);
    let phi = model.input_spectra(omega)?;
    if s.iter().any(|v| v.norm() < 1e-12) {
        return Err(Error::SingularAtFrequency {
            omega,
            condition: f64::INFINITY,
        });
    }
    let one = C64::new(1.0, 0.0);
    let i_minus_h = DMatrix::from_fn(m, m, |j, i| if i == j { one } else { -model.a[(j, i)] / s[j] });
    let condition = condition_number(&i_minus_h);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularAtFrequency { omega, condition });
    }
    let weights: Vec<f64> = (0..m).map(|j| s[j].norm_sqr() / phi[j]).collect();
    let mut k = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    for j in 0..m {
        for i in 0..m {
            k[(j, i)] = (0..m)
                .map(|r| i_minus_h[(r, j)].conj() * weights[r] * i_minus_h[(r, i)])
                .sum();
        }
    }
    Ok(k)
}

/// Response of the optimal predictor of `target` from `source` at one frequency.
pub fn analytic_wiener_at(model: &ZDomainModel, target: usize, source: usize, omega: f64) -> Result<C64> {
    check_pair(model, target, source)?;
    let k = analytic_spectrum_inverse(model, omega)?;
    Ok(-k[(target, source)] / k[(target, target)])
}

pub fn analytic_wiener(model: &ZDomainModel, target: usize, source: usize, grid: &FrequencyGrid) -> Result<Vec<C64>> {
    grid.omegas()
        .iter()
        .map(|&w| analytic_wiener_at(model, target, source, w))
        .collect()
}

/// Exact responses of every ordered pair on the grid.
pub fn response_table(model: &ZDomainModel, grid: &FrequencyGrid) -> Result<ResponseTable> {
    let m = model.node_count();
    let mut values = vec![vec![Vec::with_capacity(grid.len()); m]; m];
    for &w in grid.omegas() {
        let k = analytic_spectrum_inverse(model, w)?;
        for j in 0..m {
            for i in 0..m {
                if i != j {
                    values[j][i].push(-k[(j, i)] / k[(j, j)]);
                }
            }
        }
    }
    ResponseTable::new(grid.clone(), values)
}

fn check_pair(model: &ZDomainModel, target: usize, source: usize) -> Result<()> {
    let m = model.node_count();
    if target >= m || source >= m || target == source {
        return Err(Error::UnknownPair {
            target: target + 1,
            source_node: source + 1,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRelation {
    Unrelated,
    StrictTwoHop,
    Neighbor,
    NeighborAndTwoHop,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyCheck {
    pub omega: f64,
    pub real_part: f64,
    pub imag_part: f64,
    /// The coupling term has a strictly positive real part.
    pub real_condition: bool,
    /// The coupling term has no imaginary part (to rounding).
    pub imag_condition: bool,
}

impl FrequencyCheck {
    pub fn holds(&self) -> bool {
        self.real_condition && self.imag_condition
    }
}

/// Whether a neighbouring pair's filter could sit at phase pi everywhere,
/// which would make it indistinguishable from a strict two-hop pair.
#[derive(Debug, Clone, Serialize)]
pub struct PathologyReport {
    pub target: usize,
    pub source: usize,
    pub relation: PairRelation,
    pub checks: Vec<FrequencyCheck>,
    /// Neighbouring pair whose conditions hold at every grid frequency.
    pub pathological: bool,
}

impl PathologyReport {
    pub fn frequencies_holding(&self) -> usize {
        self.checks.iter().filter(|c| c.holds()).count()
    }
}

pub fn relation(support: &EdgeSet, target: usize, source: usize) -> PairRelation {
    let neighbor = support.has(target, source);
    let shared = support
        .neighbors(target)
        .intersection(&support.neighbors(source))
        .next()
        .is_some();
    match (neighbor, shared) {
        (true, true) => PairRelation::NeighborAndTwoHop,
        (true, false) => PairRelation::Neighbor,
        (false, true) => PairRelation::StrictTwoHop,
        (false, false) => PairRelation::Unrelated,
    }
}

/// Evaluates the coupling term
/// `-a_ij S_i / Phi_p_i - a_ji conj(S_j) / Phi_p_j + sum_k a_kj a_ki / Phi_p_k`
/// (the sum over common neighbours `k`) whose sign and reality decide whether
/// the pair's filter phase equals pi. The filter phase is pi at `w` exactly
/// when this term is real and positive there.
pub fn check_pathology_conditions(
    model: &ZDomainModel,
    target: usize,
    source: usize,
    grid: &FrequencyGrid,
) -> Result<PathologyReport> {
    check_pair(model, target, source)?;
    let (j, i) = (target, source);
    let support = model.support();
    let rel = relation(&support, j, i);
    let common: Vec<usize> = support
        .neighbors(j)
        .intersection(&support.neighbors(i))
        .copied()
        .collect();
    let a = &model.a;
    let mut checks = Vec::with_capacity(grid.len());
    for &w in grid.omegas() {
        let phi = model.input_spectra(w)?;
        let s = model.diagonal_terms(w);
        let direct = -(a[(i, j)] * s[i]) / phi[i] - (a[(j, i)] * s[j].conj()) / phi[j];
        let shared: f64 = common.iter().map(|&k| a[(k, j)] * a[(k, i)] / phi[k]).sum();
        let term = direct + shared;
        let scale = direct.norm() + shared.abs();
        checks.push(FrequencyCheck {
            omega: w,
            real_part: term.re,
            imag_part: term.im,
            real_condition: term.re > 0.0,
            imag_condition: term.im.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE),
        });
    }
    let neighbor = matches!(rel, PairRelation::Neighbor | PairRelation::NeighborAndTwoHop);
    let pathological = neighbor && checks.iter().all(FrequencyCheck::holds);
    Ok(PathologyReport {
        target: j,
        source: i,
        relation: rel,
        checks,
        pathological,
    })
}
