//! RC network description and its discrete-time transition matrix.
//!
//! Zones are capacitances, inter-zone heat paths are resistances. Each zone may
//! also be tied to a fixed ambient temperature through its own resistance; that
//! coupling only damps the zone and never shows up as a graph edge.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{Edge, EdgeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub label: String,
    pub capacitance: f64,
    pub ambient_resistance: Option<f64>,
}

/// Resistance between zones `a` and `b` (indices into [`RcNetwork::zones`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Resistor {
    pub a: usize,
    pub b: usize,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RcNetwork {
    pub zones: Vec<Zone>,
    pub resistors: Vec<Resistor>,
}

/// One invariant violation. Node numbers in messages are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    NoZones,
    NonPositiveCapacitance { node: usize, value: f64 },
    NonPositiveAmbientResistance { node: usize, value: f64 },
    NonPositiveResistance { a: usize, b: usize, value: f64 },
    SelfLoop { node: usize },
    DuplicateEdge { a: usize, b: usize },
    UnknownNode { node: usize },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Finding::NoZones => write!(f, "network has no zones"),
            Finding::NonPositiveCapacitance { node, value } => {
                write!(f, "non-positive capacitance {value} at node {}", node + 1)
            }
            Finding::NonPositiveAmbientResistance { node, value } => {
                write!(f, "non-positive ambient resistance {value} at node {}", node + 1)
            }
            Finding::NonPositiveResistance { a, b, value } => {
                write!(f, "non-positive resistance on ({},{}): {value}", a + 1, b + 1)
            }
            Finding::SelfLoop { node } => write!(f, "self-loop at node {}", node + 1),
            Finding::DuplicateEdge { a, b } => {
                write!(f, "duplicate edge ({},{})", a.min(b) + 1, a.max(b) + 1)
            }
            Finding::UnknownNode { node } => {
                write!(f, "edge references node {} which does not exist", node + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let text: Vec<String> = self.findings.iter().map(ToString::to_string).collect();
        Err(Error::InvalidNetwork(text.join("; ")))
    }
}

impl RcNetwork {
    pub fn node_count(&self) -> usize {
        self.zones.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.zones.iter().map(|z| z.label.clone()).collect()
    }

    pub fn has_ambient_coupling(&self) -> bool {
        self.zones.iter().any(|z| z.ambient_resistance.is_some())
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn discretize(&self, dt: f64) -> Result<DiscreteDynamics> {
        discretize(self, dt)
    }

    pub fn true_edge_set(&self) -> EdgeSet {
        true_edge_set(self)
    }

    /// SHA-256 of the canonical JSON form; identifies a network in run manifests.
    pub fn content_hash(&self) -> String {
        let doc = NetworkDocument::from_network(self, None);
        let bytes = serde_json::to_vec(&doc).expect("network document serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn validate(net: &RcNetwork) -> ValidationReport {
    let mut findings = Vec::new();
    let m = net.node_count();
    if m == 0 {
        findings.push(Finding::NoZones);
    }
    for (node, zone) in net.zones.iter().enumerate() {
        if !(zone.capacitance > 0.0) || !zone.capacitance.is_finite() {
            findings.push(Finding::NonPositiveCapacitance {
                node,
                value: zone.capacitance,
            });
        }
        if let Some(r) = zone.ambient_resistance {
            if !(r > 0.0) || !r.is_finite() {
                findings.push(Finding::NonPositiveAmbientResistance { node, value: r });
            }
        }
    }
    let mut seen = BTreeSet::new();
    for r in &net.resistors {
        for node in [r.a, r.b] {
            if node >= m {
                findings.push(Finding::UnknownNode { node });
            }
        }
        if r.a == r.b {
            findings.push(Finding::SelfLoop { node: r.a });
            continue;
        }
        if !(r.resistance > 0.0) || !r.resistance.is_finite() {
            findings.push(Finding::NonPositiveResistance {
                a: r.a,
                b: r.b,
                value: r.resistance,
            });
        }
        if !seen.insert(Edge::new(r.a, r.b)) {
            findings.push(Finding::DuplicateEdge { a: r.a, b: r.b });
        }
    }
    ValidationReport { findings }
}

/// Forward-Euler discretization with step `dt`:
/// `a_ji = dt / (R_ji C_j)` and `a_jj = 1 - dt (sum_i 1/(R_ji C_j) + 1/(R_amb_j C_j))`.
pub fn discretize(net: &RcNetwork, dt: f64) -> Result<DiscreteDynamics> {
    validate(net).into_result()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive and finite, got {dt}"
        )));
    }
    let m = net.node_count();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut outflow = vec![0.0; m];
    for r in &net.resistors {
        let (i, j) = (r.a, r.b);
        let to_j = dt / (r.resistance * net.zones[j].capacitance);
        let to_i = dt / (r.resistance * net.zones[i].capacitance);
        a[(j, i)] = to_j;
        a[(i, j)] = to_i;
        outflow[j] += to_j;
        outflow[i] += to_i;
    }
    for (j, zone) in net.zones.iter().enumerate() {
        if let Some(r_amb) = zone.ambient_resistance {
            outflow[j] += dt / (r_amb * zone.capacitance);
        }
        a[(j, j)] = 1.0 - outflow[j];
        if a[(j, j)] <= 0.0 {
            return Err(Error::UnstableDiscretization(format!(
                "diagonal entry of node {} is {} <= 0; reduce the time step",
                j + 1,
                a[(j, j)]
            )));
        }
    }
    let dynamics = DiscreteDynamics { a, dt };
    if net.has_ambient_coupling() {
        let radius = dynamics.spectral_radius();
        if radius >= 1.0 - 1e-12 {
            return Err(Error::UnstableDiscretization(format!(
                "spectral radius {radius} is not below 1; some zone is not damped by an ambient path"
            )));
        }
    }
    Ok(dynamics)
}

pub fn true_edge_set(net: &RcNetwork) -> EdgeSet {
    net.resistors
        .iter()
        .filter(|r| r.a != r.b)
        .map(|r| Edge::new(r.a, r.b))
        .collect()
}

/// Transition matrix `A` of `T(k+1) = A T(k) + P(k)`, with `A(j,i) = a_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDynamics {
    a: DMatrix<f64>,
    dt: f64,
}

impl DiscreteDynamics {
    pub fn new(a: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "transition matrix has non-finite entries".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt} is not positive")));
        }
        Ok(Self { a, dt })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Pairs coupled in either direction.
    pub fn support(&self) -> EdgeSet {
        let m = self.node_count();
        let mut out = EdgeSet::new();
        for j in 0..m {
            for i in 0..m {
                if i != j && self.a[(j, i)] != 0.0 {
                    out.insert(Edge::new(i, j));
                }
            }
        }
        out
    }

    /// Applies a relabeling where node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.node_count();
        let mut a = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..m {
                a[(perm[j], perm[i])] = self.a[(j, i)];
            }
        }
        Self { a, dt: self.dt }
    }
}

/// A network together with the sampling interval its file declares.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub network: RcNetwork,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeId {
    Text(String),
    Number(u64),
}

impl NodeId {
    fn into_label(self) -> String {
        match self {
            NodeId::Text(s) => s,
            NodeId::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: NodeId,
    capacitance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ambient_resistance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    a: NodeId,
    b: NodeId,
    resistance: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

impl NetworkDocument {
    fn from_network(net: &RcNetwork, dt: Option<f64>) -> Self {
        Self {
            dt,
            nodes: net
                .zones
                .iter()
                .map(|z| NodeEntry {
                    id: NodeId::Text(z.label.clone()),
                    capacitance: z.capacitance,
                    ambient_resistance: z.ambient_resistance,
                })
                .collect(),
            edges: net
                .resistors
                .iter()
                .map(|r| EdgeEntry {
                    a: NodeId::Text(net.zones[r.a].label.clone()),
                    b: NodeId::Text(net.zones[r.b].label.clone()),
                    resistance: r.resistance,
                })
                .collect(),
        }
    }
}

impl NetworkFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedFile {
            path: path.to_path_buf(),
            detail: format!("cannot read network file: {e}"),
        })?;
        Self::parse(&text, path)
    }

    /// Parses the JSON network format; `origin` is only used in diagnostics.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |detail: String| Error::MalformedFile {
            path: PathBuf::from(origin),
            detail,
        };
        let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let mut index = BTreeMap::new();
        let mut zones = Vec::with_capacity(doc.nodes.len());
        for node in doc.nodes {
            let label = node.id.into_label();
            if index.insert(label.clone(), zones.len()).is_some() {
                return Err(malformed(format!("duplicate node id '{label}'")));
            }
            zones.push(Zone {
                label,
                capacitance: node.capacitance,
                ambient_resistance: node.ambient_resistance,
            });
        }
        let mut resistors = Vec::with_capacity(doc.edges.len());
        for (n, edge) in doc.edges.into_iter().enumerate() {
            let lookup = |id: NodeId| {
                let label = id.into_label();
                index.get(&label).copied().ok_or_else(|| {
                    malformed(format!("edge {} references unknown node id '{label}'", n + 1))
                })
            };
            let a = lookup(edge.a)?;
            let b = lookup(edge.b)?;
            resistors.push(Resistor {
                a,
                b,
                resistance: edge.resistance,
            });
        }
        Ok(Self {
            network: RcNetwork { zones, resistors },
            dt: doc.dt,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocument::from_network(&self.network, self.dt);
        serde_json::to_string_pretty(&doc).expect("network document serializes")
    }
}

/// Reference networks used by the CLI defaults and the test suites.
pub mod presets {
    use super::*;

    const FIVE_ZONE_JSON: &str = include_str!("../data/five_zone.json");

    /// Core zone (node 1) tied to four perimeter zones arranged in a ring.
    /// C = 1, core-perimeter R = 10, ring R = 20, ambient R = 15.
    pub fn five_zone() -> RcNetwork {
        five_zone_file().network
    }

    pub fn five_zone_file() -> NetworkFile {
        NetworkFile::parse(FIVE_ZONE_JSON, Path::new("five_zone.json"))
            .expect("bundled five-zone network parses")
    }

    /// Two zones, R = 10, C = 1, ambient R = 5 on both, giving `A = [[0.7, 0.1], [0.1, 0.7]]`.
    pub fn two_zone() -> RcNetwork {
        chain(2, 10.0, Some(5.0))
    }

    /// Path graph `1 - 2 - ... - n` with unit capacitances.
    pub fn chain(n: usize, resistance: f64, ambient: Option<f64>) -> RcNetwork {
        RcNetwork {
            zones: (0..n).map(|j| unit_zone(j, ambient)).collect(),
            resistors: (1..n)
                .map(|j| Resistor {
                    a: j - 1,
                    b: j,
                    resistance,
                })
                .collect(),
        }
    }

    /// Zones with no inter-zone paths.
    pub fn isolated(n: usize, ambient: Option<f64>) -> RcNetwork {
        RcNetwork {
            zones: (0..n).map(|j| unit_zone(j, ambient)).collect(),
            resistors: Vec::new(),
        }
    }

    fn unit_zone(j: usize, ambient: Option<f64>) -> Zone {
        Zone {
            label: (j + 1).to_string(),
            capacitance: 1.0,
            ambient_resistance: ambient,
        }
    }
}
