//! Finite-lag two-sided Wiener filters estimated from a temperature panel.
//!
//! For a target node `j` the filter predicts `T_j(k)` from every other node's
//! samples `T_i(k - L)`, `L = -F..=F`. The empirical mean squared residual
//! (plus an optional L1 penalty) is minimized over the coefficients `h_ji^L`.
//! All targets share one lagged Gram matrix, built once per panel.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lasso::{self, LassoOptions};
use crate::panel::TimeSeriesPanel;
use crate::{Error, Result};

/// Strictly increasing angular frequencies in `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidParameter("frequency grid is empty".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(0.0..=PI).contains(*w)) {
            return Err(Error::InvalidParameter(format!("frequency {w} lies outside [0, pi]")));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidParameter("frequency grid is not strictly increasing".into()));
        }
        Ok(Self { omegas })
    }

    /// `points` equispaced frequencies from 0 to pi inclusive.
    pub fn uniform(points: usize) -> Result<Self> {
        match points {
            0 => Self::new(Vec::new()),
            1 => Self::new(vec![0.0]),
            _ => Self::new(
                (0..points)
                    .map(|k| PI * k as f64 / (points - 1) as f64)
                    .collect(),
            ),
        }
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::uniform(64).expect("64-point grid is valid")
    }
}

/// `sum_L taps[L + F] e^{-i omega L}` for taps covering lags `-F..=F`.
pub fn response_at(taps: &[f64], omega: f64) -> Complex<f64> {
    let f = (taps.len() as i64 - 1) / 2;
    taps.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (idx, &h)| {
        let lag = idx as i64 - f;
        acc + Complex::from_polar(h, -omega * lag as f64)
    })
}

/// Coefficients of every ordered pair `(target, source)`, `target != source`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    lag_order: usize,
    labels: Vec<String>,
    /// `taps[target][source]`, empty when `target == source`.
    taps: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct BankDocument {
    lag_order: usize,
    filters: Vec<PairDocument>,
}

#[derive(Serialize, Deserialize)]
struct PairDocument {
    target: String,
    source: String,
    /// Lags `-F..=F` in order.
    taps: Vec<f64>,
}

impl FilterBank {
    pub fn new(lag_order: usize, labels: Vec<String>, taps: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = labels.len();
        let width = 2 * lag_order + 1;
        if taps.len() != m {
            return Err(Error::DimensionMismatch(format!("{} targets for {m} nodes", taps.len())));
        }
        for (j, row) in taps.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "target {} has {} sources, expected {m}",
                    j + 1,
                    row.len()
                )));
            }
            for (i, h) in row.iter().enumerate() {
                let expected = if i == j { 0 } else { width };
                if h.len() != expected {
                    return Err(Error::DimensionMismatch(format!(
                        "pair ({},{}) has {} taps, expected {expected}",
                        j + 1,
                        i + 1,
                        h.len()
                    )));
                }
                if h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SolverDiverged(format!(
                        "pair ({},{}) has non-finite taps",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { lag_order, labels, taps })
    }

    /// A bank with every coefficient zero.
    pub fn zeros(lag_order: usize, labels: Vec<String>) -> Self {
        let m = labels.len();
        let taps = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| if i == j { Vec::new() } else { vec![0.0; 2 * lag_order + 1] })
                    .collect()
            })
            .collect();
        Self { lag_order, labels, taps }
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pair_count(&self) -> usize {
        let m = self.node_count();
        m * m.saturating_sub(1)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.node_count();
        (0..m).flat_map(move |j| (0..m).filter(move |&i| i != j).map(move |i| (j, i)))
    }

    fn check_pair(&self, target: usize, source: usize) -> Result<()> {
        let m = self.node_count();
        if target >= m || source >= m || target == source {
            return Err(Error::UnknownPair {
                target: target + 1,
                source_node: source + 1,
            });
        }
        Ok(())
    }

    /// Taps of `W_{target,source}` over lags `-F..=F`.
    pub fn taps(&self, target: usize, source: usize) -> Result<&[f64]> {
        self.check_pair(target, source)?;
        Ok(&self.taps[target][source])
    }

    /// Coefficient at a single lag.
    pub fn tap(&self, target: usize, source: usize, lag: i64) -> Result<f64> {
        let taps = self.taps(target, source)?;
        let f = self.lag_order as i64;
        if lag.abs() > f {
            return Ok(0.0);
        }
        Ok(taps[(lag + f) as usize])
    }

    pub fn freq_response(&self, target: usize, source: usize, grid: &FrequencyGrid) -> Result<Vec<Complex<f64>>> {
        let taps = self.taps(target, source)?;
        Ok(grid.omegas().iter().map(|&w| response_at(taps, w)).collect())
    }

    /// Largest response magnitude over the grid.
    pub fn h_inf_norm(&self, target: usize, source: usize, grid: &FrequencyGrid) -> Result<f64> {
        Ok(self
            .freq_response(target, source, grid)?
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// Bank for the relabeled panel where node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.node_count();
        let mut labels = vec![String::new(); m];
        let mut taps = vec![vec![Vec::new(); m]; m];
        for j in 0..m {
            labels[perm[j]] = self.labels[j].clone();
            for i in 0..m {
                taps[perm[j]][perm[i]] = self.taps[j][i].clone();
            }
        }
        Self {
            lag_order: self.lag_order,
            labels,
            taps,
        }
    }

    /// Number of coefficients that are exactly nonzero.
    pub fn nonzero_count(&self) -> usize {
        self.taps.iter().flatten().flatten().filter(|v| **v != 0.0).count()
    }

    pub fn to_json(&self) -> String {
        let filters = self
            .pairs()
            .map(|(j, i)| PairDocument {
                target: self.labels[j].clone(),
                source: self.labels[i].clone(),
                taps: self.taps[j][i].clone(),
            })
            .collect();
        let doc = BankDocument {
            lag_order: self.lag_order,
            filters,
        };
        serde_json::to_string_pretty(&doc).expect("bank serializes")
    }

    /// Parses [`to_json`](Self::to_json) output; node order follows first appearance.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |detail: String| Error::MalformedFile {
            path: origin.to_path_buf(),
            detail,
        };
        let doc: BankDocument = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let mut labels: Vec<String> = Vec::new();
        for p in &doc.filters {
            for l in [&p.target, &p.source] {
                if !labels.contains(l) {
                    labels.push(l.clone());
                }
            }
        }
        let mut bank = Self::zeros(doc.lag_order, labels.clone());
        let index = |l: &str| labels.iter().position(|x| x == l).unwrap();
        for p in doc.filters {
            let (j, i) = (index(&p.target), index(&p.source));
            if j == i {
                return Err(malformed(format!("filter from node '{}' to itself", p.target)));
            }
            bank.taps[j][i] = p.taps;
        }
        Self::new(bank.lag_order, bank.labels, bank.taps).map_err(|e| malformed(e.to_string()))
    }
}

/// Second moments of every lagged node series over a common sample window.
///
/// Column `i * (2F + 1) + (L + F)` stands for `T_i(k - L)`, and entries are
/// averaged over `k = F..N-F` of the centered panel.
#[derive(Debug, Clone)]
pub struct LaggedCovariance {
    lag_order: usize,
    node_count: usize,
    samples: usize,
    gram: DMatrix<f64>,
}

impl LaggedCovariance {
    pub fn new(panel: &TimeSeriesPanel, lag_order: usize) -> Result<Self> {
        let m = panel.node_count();
        let n = panel.len();
        let f = lag_order;
        if n <= 2 * f {
            return Err(Error::InsufficientSamples {
                required: 2 * f + 1,
                available: n,
            });
        }
        let centered = panel.centered();
        let x = centered.all_series();
        let width = 2 * f + 1;
        let n_eff = n - 2 * f;
        let mut gram = DMatrix::zeros(m * width, m * width);
        let fi = f as i64;
        for a in 0..m {
            for b in a..m {
                let (xa, xb) = (&x[a], &x[b]);
                // Entries with the same lag difference d = La - Lb are one
                // sliding window apart: moving both lags up by one drops the
                // newest product and adds one older product.
                for d in -2 * fi..=2 * fi {
                    let lo = (-fi).max(d - fi);
                    let hi = fi.min(d + fi);
                    let mut la = lo;
                    let mut lb = la - d;
                    let start = (fi - la) as usize;
                    let offset = (la - lb) as isize;
                    let mut sum: f64 = (start..start + n_eff)
                        .map(|u| xa[u] * xb[(u as isize + offset) as usize])
                        .sum();
                    loop {
                        let ca = a * width + (la + fi) as usize;
                        let cb = b * width + (lb + fi) as usize;
                        let v = sum / n_eff as f64;
                        gram[(ca, cb)] = v;
                        gram[(cb, ca)] = v;
                        if la == hi {
                            break;
                        }
                        let top = (n as i64 - fi - 1 - la) as usize;
                        let top_b = (n as i64 - fi - 1 - lb) as usize;
                        let bottom = (fi - la - 1) as usize;
                        let bottom_b = (fi - lb - 1) as usize;
                        sum += xa[bottom] * xb[bottom_b] - xa[top] * xb[top_b];
                        la += 1;
                        lb += 1;
                    }
                }
            }
        }
        Ok(Self {
            lag_order,
            node_count: m,
            samples: n,
            gram,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn column(&self, node: usize, lag: i64) -> usize {
        node * (2 * self.lag_order + 1) + (lag + self.lag_order as i64) as usize
    }

    /// Regressor columns for `target` (every other node, every lag) with
    /// their Gram block and cross-moments against `T_target(k)`.
    fn regression_problem(&self, target: usize) -> (Vec<usize>, DMatrix<f64>, Vec<f64>) {
        let width = 2 * self.lag_order + 1;
        let cols: Vec<usize> = (0..self.node_count)
            .filter(|&i| i != target)
            .flat_map(|i| (i * width)..(i + 1) * width)
            .collect();
        let y = self.column(target, 0);
        let g = DMatrix::from_fn(cols.len(), cols.len(), |r, c| self.gram[(cols[r], cols[c])]);
        let b = cols.iter().map(|&c| self.gram[(c, y)]).collect();
        (cols, g, b)
    }
}

/// Smallest sample count accepted for `m` nodes at lag order `F`.
pub fn sample_floor(m: usize, lag_order: usize) -> usize {
    4 * m * (2 * lag_order + 1) + 1
}

fn check_samples(panel: &TimeSeriesPanel, lag_order: usize) -> Result<()> {
    let required = sample_floor(panel.node_count(), lag_order);
    if panel.len() < required {
        return Err(Error::InsufficientSamples {
            required,
            available: panel.len(),
        });
    }
    Ok(())
}

fn solve_normal_equations(g: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    if let Some(chol) = g.clone().cholesky() {
        return Ok(chol.solve(&rhs).iter().copied().collect());
    }
    let jitter = 1e-10 * g.trace().max(f64::MIN_POSITIVE);
    let mut ridge = g.clone();
    for k in 0..ridge.nrows() {
        ridge[(k, k)] += jitter;
    }
    match ridge.cholesky() {
        Some(chol) => Ok(chol.solve(&rhs).iter().copied().collect()),
        None => Err(Error::SolverDiverged(
            "normal equations are not positive definite even after jitter".into(),
        )),
    }
}

/// Per-source taps for one target; the target's own entry is empty.
fn fit_target(cov: &LaggedCovariance, target: usize, gamma: f64) -> Result<Vec<Vec<f64>>> {
    let (cols, g, b) = cov.regression_problem(target);
    let h = if gamma == 0.0 {
        solve_normal_equations(&g, &b)?
    } else {
        lasso::solve(&g, &b, gamma, None, &LassoOptions::default())?.coefficients
    };
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverDiverged("non-finite filter coefficients".into()));
    }
    let width = 2 * cov.lag_order + 1;
    let mut out = vec![Vec::new(); cov.node_count];
    for (chunk, &c) in h.chunks(width).zip(cols.iter().step_by(width)) {
        out[c / width] = chunk.to_vec();
    }
    Ok(out)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma must be non-negative, got {gamma}")))
    }
}

/// Filter taps of `target` against every other node (`result[target]` is empty).
pub fn fit_wiener(panel: &TimeSeriesPanel, target: usize, lag_order: usize, gamma: f64) -> Result<Vec<Vec<f64>>> {
    check_gamma(gamma)?;
    if target >= panel.node_count() {
        return Err(Error::InvalidParameter(format!("no node {}", target + 1)));
    }
    check_samples(panel, lag_order)?;
    let cov = LaggedCovariance::new(panel, lag_order)?;
    fit_target(&cov, target, gamma)
}

/// Fits every target in parallel from one shared lagged covariance.
pub fn fit_all(panel: &TimeSeriesPanel, lag_order: usize, gamma: f64) -> Result<FilterBank> {
    check_gamma(gamma)?;
    check_samples(panel, lag_order)?;
    let cov = LaggedCovariance::new(panel, lag_order)?;
    let taps = (0..panel.node_count())
        .into_par_iter()
        .map(|j| {
            fit_target(&cov, j, gamma).map_err(|e| Error::AtNode {
                node: j + 1,
                inner: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FilterBank::new(lag_order, panel.labels().to_vec(), taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_inputs, NoisePlan};

    fn white_panel(m: usize, n: usize, seed: u64) -> TimeSeriesPanel {
        generate_inputs(&NoisePlan::white(m, 1.0, seed), m, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 4.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        let g = FrequencyGrid::default();
        assert_eq!(g.len(), 64);
        assert_eq!(g.omegas()[0], 0.0);
        assert_eq!(g.omegas()[63], PI);
    }

    fn bank_with(taps: Vec<f64>) -> FilterBank {
        let f = (taps.len() - 1) / 2;
        let mut bank = FilterBank::zeros(f, vec!["1".into(), "2".into()]);
        bank.taps[0][1] = taps;
        bank
    }

    #[test]
    fn constant_tap_response() {
        let bank = bank_with(vec![0.0, 0.3, 0.0]);
        let g = FrequencyGrid::default();
        for z in bank.freq_response(0, 1, &g).unwrap() {
            assert!((z - Complex::new(0.3, 0.0)).norm() < 1e-15);
        }
        assert!((bank.h_inf_norm(0, 1, &g).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(bank.h_inf_norm(1, 0, &g).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_taps_give_cosine() {
        let bank = bank_with(vec![1.0, 0.0, 1.0]);
        let g = FrequencyGrid::new(vec![0.0, 1.0, PI / 2.0]).unwrap();
        let w = bank.freq_response(0, 1, &g).unwrap();
        assert!((w[0] - Complex::new(2.0, 0.0)).norm() < 1e-15);
        assert!((w[1] - Complex::new(2.0 * 1f64.cos(), 0.0)).norm() < 1e-15);
        assert!(w[2].norm() < 1e-15);
        assert!((bank.h_inf_norm(0, 1, &g).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn odd_taps_are_imaginary() {
        let bank = bank_with(vec![-0.7, 0.0, 0.7]);
        for z in bank.freq_response(0, 1, &FrequencyGrid::default()).unwrap() {
            assert!(z.re.abs() < 1e-15);
        }
    }

    #[test]
    fn real_taps_are_conjugate_symmetric() {
        let taps = vec![0.3, -0.1, 0.25, 0.8, -0.4];
        for w in [0.1, 0.7, 2.9] {
            assert_eq!(response_at(&taps, -w), response_at(&taps, w).conj());
        }
    }

    #[test]
    fn unknown_pair_is_an_error() {
        let bank = FilterBank::zeros(1, vec!["a".into(), "b".into()]);
        assert!(matches!(bank.taps(0, 0), Err(Error::UnknownPair { .. })));
        assert!(matches!(bank.taps(0, 5), Err(Error::UnknownPair { .. })));
        assert_eq!(bank.pair_count(), 2);
    }

    #[test]
    fn lagged_covariance_matches_direct_sums() {
        let panel = white_panel(3, 60, 4);
        let f = 3;
        let cov = LaggedCovariance::new(&panel, f).unwrap();
        let x = panel.centered();
        let n = panel.len();
        let fi = f as i64;
        for a in 0..3 {
            for b in 0..3 {
                for la in -fi..=fi {
                    for lb in -fi..=fi {
                        let direct: f64 = (f..n - f)
                            .map(|k| {
                                x.value(a, (k as i64 - la) as usize) * x.value(b, (k as i64 - lb) as usize)
                            })
                            .sum::<f64>()
                            / (n - 2 * f) as f64;
                        let got = cov.gram()[(cov.column(a, la), cov.column(b, lb))];
                        assert!((got - direct).abs() < 1e-12, "{a},{b},{la},{lb}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_copy_is_recovered() {
        let base = white_panel(2, 2000, 1);
        let copy = base.series(0).to_vec();
        let panel = TimeSeriesPanel::numbered(
            1.0,
            vec![base.series(0).to_vec(), base.series(1).to_vec(), copy],
        )
        .unwrap();
        let h = fit_wiener(&panel, 2, 2, 0.0).unwrap();
        assert!(h[2].is_empty());
        for (lag, v) in h[0].iter().enumerate() {
            let expect = if lag == 2 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-6, "lag {lag}: {v}");
        }
        assert!(h[1].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn independent_series_have_small_filters() {
        let panel = white_panel(5, 100_000, 8);
        let bank = fit_all(&panel, 10, 0.0).unwrap();
        assert_eq!(bank.pair_count(), 20);
        for (j, i) in bank.pairs() {
            let peak = bank.taps(j, i).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(peak < 0.05, "({j},{i}) {peak}");
        }
    }

    #[test]
    fn too_few_samples() {
        let panel = white_panel(2, 40, 0);
        let err = fit_all(&panel, 2, 0.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { required: 41, available: 40 }));
        assert!(fit_all(&white_panel(2, 41, 0), 2, 0.0).is_ok());
    }

    #[test]
    fn penalty_sparsifies() {
        let panel = white_panel(3, 3000, 2);
        let plain = fit_all(&panel, 3, 0.0).unwrap();
        let sparse = fit_all(&panel, 3, 0.1).unwrap();
        let huge = fit_all(&panel, 3, 1e3).unwrap();
        assert!(plain.nonzero_count() >= sparse.nonzero_count());
        assert_eq!(huge.nonzero_count(), 0);
    }

    #[test]
    fn relabeling_commutes_with_fitting() {
        let net = crate::network::presets::chain(3, 10.0, Some(5.0));
        let d = net.discretize(1.0).unwrap();
        let panel = crate::simulate::simulate(&d, &net.labels(), &NoisePlan::white(3, 1.0, 3), 5000, 200).unwrap();
        let perm = [2, 0, 1];
        let a = fit_all(&panel, 4, 0.0).unwrap().permuted(&perm);
        let b = fit_all(&panel.permuted(&perm), 4, 0.0).unwrap();
        assert_eq!(a.labels(), b.labels());
        for (j, i) in a.pairs() {
            for (x, y) in a.taps(j, i).unwrap().iter().zip(b.taps(j, i).unwrap()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let panel = white_panel(3, 500, 6);
        let bank = fit_all(&panel, 2, 0.0).unwrap();
        let back = FilterBank::from_json(&bank.to_json(), Path::new("bank.json")).unwrap();
        assert_eq!(back, bank);
    }
}
