//! Undirected edge sets over node indices `0..m`.

use std::collections::BTreeSet;
use std::fmt;

/// Unordered pair of distinct nodes, stored with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    lo: usize,
    hi: usize,
}

impl Edge {
    /// Panics if `a == b`; self-loops are never edges.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "an edge needs two distinct endpoints");
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn contains(self, node: usize) -> bool {
        self.lo == node || self.hi == node
    }

    pub fn relabel(self, perm: &[usize]) -> Self {
        Self::new(perm[self.lo], perm[self.hi])
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo + 1, self.hi + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSet(BTreeSet<Edge>);

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from index pairs; orientation and repeats are ignored.
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        pairs.into_iter().map(|(a, b)| Edge::new(a, b)).collect()
    }

    /// Every unordered pair over `m` nodes.
    pub fn complete(m: usize) -> Self {
        (0..m)
            .flat_map(|a| (a + 1..m).map(move |b| Edge::new(a, b)))
            .collect()
    }

    pub fn insert(&mut self, edge: Edge) -> bool {
        self.0.insert(edge)
    }

    pub fn remove(&mut self, edge: Edge) -> bool {
        self.0.remove(&edge)
    }

    pub fn contains(&self, edge: Edge) -> bool {
        self.0.contains(&edge)
    }

    pub fn has(&self, a: usize, b: usize) -> bool {
        a != b && self.0.contains(&Edge::new(a, b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Edge> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn difference<'a>(&'a self, other: &'a EdgeSet) -> impl Iterator<Item = Edge> + 'a {
        self.0.difference(&other.0).copied()
    }

    pub fn symmetric_difference_len(&self, other: &EdgeSet) -> usize {
        self.0.symmetric_difference(&other.0).count()
    }

    pub fn neighbors(&self, node: usize) -> BTreeSet<usize> {
        self.iter()
            .filter(|e| e.contains(node))
            .map(|e| {
                let (a, b) = e.endpoints();
                if a == node {
                    b
                } else {
                    a
                }
            })
            .collect()
    }

    /// Nodes other than `node` that share at least one neighbour with it.
    /// A direct neighbour is included when it also shares a neighbour.
    pub fn two_hop_neighbors(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for k in self.neighbors(node) {
            out.extend(self.neighbors(k).into_iter().filter(|&i| i != node));
        }
        out
    }

    /// Pairs that share a neighbour but are not adjacent.
    pub fn strict_two_hop_pairs(&self, m: usize) -> EdgeSet {
        let mut out = EdgeSet::new();
        for j in 0..m {
            for i in self.two_hop_neighbors(j) {
                if !self.has(i, j) {
                    out.insert(Edge::new(i, j));
                }
            }
        }
        out
    }

    /// Applies `perm`, where node `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> EdgeSet {
        self.iter().map(|e| e.relabel(perm)).collect()
    }
}

impl FromIterator<Edge> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = Edge>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a EdgeSet {
    type Item = Edge;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, Edge>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, e) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Symmetric edge strengths, one per unordered pair, for threshold-based edge calls.
#[derive(Debug, Clone)]
pub struct EdgeScores {
    node_count: usize,
    scores: Vec<(Edge, f64)>,
}

impl EdgeScores {
    /// Scores each pair by `max(|w[a][b]|, |w[b][a]|)` of a square coefficient table.
    pub fn from_directed(node_count: usize, weight: impl Fn(usize, usize) -> f64) -> Self {
        let scores = (0..node_count)
            .flat_map(|a| (a + 1..node_count).map(move |b| (a, b)))
            .map(|(a, b)| (Edge::new(a, b), weight(a, b).abs().max(weight(b, a).abs())))
            .collect();
        Self { node_count, scores }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn score(&self, edge: Edge) -> f64 {
        self.scores
            .iter()
            .find(|(e, _)| *e == edge)
            .map_or(0.0, |(_, s)| *s)
    }

    /// Pairs whose score strictly exceeds `threshold`.
    pub fn edges_above(&self, threshold: f64) -> EdgeSet {
        self.scores
            .iter()
            .filter(|(_, s)| *s > threshold)
            .map(|(e, _)| *e)
            .collect()
    }
}
