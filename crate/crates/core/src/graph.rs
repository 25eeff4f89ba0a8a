//! Population structure: a directed graph whose weight matrix is
//! row-stochastic, plus the mutant configurations placed on it.
//!
//! `w_ij` is the probability that `j` is the vertex replaced when `i`
//! reproduces. Every vertex with at least one outgoing edge must have its
//! outgoing weights sum to one; an edge exists exactly when its weight is
//! positive. Self-loops are not part of the model.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on outgoing weight sums. Rows within it are renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const UNWEIGHTED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(source: usize, target: usize, weight: f64) -> Self {
        Edge {
            source,
            target,
            weight,
        }
    }
}

/// Unchecked graph description, as read from disk or built by hand.
///
/// Serializes as `{"n": N, "edges": [[i, j, w], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(with = "edge_triples")]
    pub edges: Vec<Edge>,
}

mod edge_triples {
    use super::Edge;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(edges: &[Edge], s: S) -> Result<S::Ok, S::Error> {
        edges
            .iter()
            .map(|e| (e.source, e.target, e.weight))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Edge>, D::Error> {
        let raw = Vec::<(usize, usize, f64)>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|(i, j, w)| Edge::new(i, j, w))
            .collect())
    }
}

/// A single broken model constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyGraph,
    VertexOutOfRange {
        source: usize,
        target: usize,
    },
    SelfLoop {
        vertex: usize,
    },
    NonPositiveWeight {
        source: usize,
        target: usize,
        weight: f64,
    },
    DuplicateEdge {
        source: usize,
        target: usize,
    },
    RowSum {
        vertex: usize,
        sum: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "graph has no vertices"),
            Violation::VertexOutOfRange { source, target } => {
                write!(
                    f,
                    "edge ({source}, {target}) references a vertex out of range"
                )
            }
            Violation::SelfLoop { vertex } => write!(f, "self-loop at vertex {vertex}"),
            Violation::NonPositiveWeight {
                source,
                target,
                weight,
            } => write!(
                f,
                "edge ({source}, {target}) has non-positive or non-finite weight {weight}"
            ),
            Violation::DuplicateEdge { source, target } => {
                write!(f, "edge ({source}, {target}) listed more than once")
            }
            Violation::RowSum { vertex, sum } => {
                write!(
                    f,
                    "outgoing weights of vertex {vertex} sum to {sum}, expected 1"
                )
            }
        }
    }
}

impl GraphSpec {
    pub fn new(n: usize, edges: Vec<Edge>) -> Self {
        GraphSpec { n, edges }
    }

    /// Every constraint the spec breaks. Empty means the graph is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::EmptyGraph);
        }
        let mut seen = BTreeSet::new();
        let mut row_sum = vec![0.0; self.n];
        let mut has_out = vec![false; self.n];
        for e in &self.edges {
            if e.source >= self.n || e.target >= self.n {
                out.push(Violation::VertexOutOfRange {
                    source: e.source,
                    target: e.target,
                });
                continue;
            }
            if e.source == e.target {
                out.push(Violation::SelfLoop { vertex: e.source });
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                out.push(Violation::NonPositiveWeight {
                    source: e.source,
                    target: e.target,
                    weight: e.weight,
                });
            }
            if !seen.insert((e.source, e.target)) {
                out.push(Violation::DuplicateEdge {
                    source: e.source,
                    target: e.target,
                });
            }
            if e.source != e.target && e.weight.is_finite() {
                row_sum[e.source] += e.weight;
                has_out[e.source] = true;
            }
        }
        for (vertex, (&sum, &any)) in row_sum.iter().zip(&has_out).enumerate() {
            if any && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(Violation::RowSum { vertex, sum });
            }
        }
        out
    }
}

/// Validated, immutable evolutionary graph.
///
/// Incoming and outgoing adjacency are both indexed; each list is sorted by
/// neighbor id so every summation over neighbors has a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionaryGraph {
    n: usize,
    edges: Vec<Edge>,
    incoming: Vec<Vec<(usize, f64)>>,
    outgoing: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<GraphSpec> for EvolutionaryGraph {
    type Error = Error;

    fn try_from(spec: GraphSpec) -> Result<Self> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidGraph(violations));
        }
        let GraphSpec { n, mut edges } = spec;

        let mut row_sum = vec![0.0; n];
        for e in &edges {
            row_sum[e.source] += e.weight;
        }
        for e in &mut edges {
            e.weight /= row_sum[e.source];
        }
        edges.sort_by_key(|e| (e.source, e.target));

        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for e in &edges {
            outgoing[e.source].push((e.target, e.weight));
            incoming[e.target].push((e.source, e.weight));
        }
        for list in &mut incoming {
            list.sort_by_key(|&(j, _)| j);
        }
        Ok(EvolutionaryGraph {
            n,
            edges,
            incoming,
            outgoing,
        })
    }
}

impl EvolutionaryGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        GraphSpec::new(n, edges).try_into()
    }

    /// Builds the unweighted graph on the given arcs: `w_ij = 1 / k_out(i)`.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut out_degree = vec![0usize; n];
        for &(i, _) in arcs {
            if i < n {
                out_degree[i] += 1;
            }
        }
        let edges = arcs
            .iter()
            .map(|&(i, j)| {
                let k = out_degree.get(i).copied().unwrap_or(1).max(1);
                Edge::new(i, j, 1.0 / k as f64)
            })
            .collect();
        Self::new(n, edges)
    }

    /// Undirected unweighted graph: each pair becomes two arcs.
    pub fn undirected(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let arcs: Vec<_> = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        Self::from_arcs(n, &arcs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges sorted by `(source, target)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(j, w_ji)` for every edge `j -> i`, sorted by `j`.
    pub fn incoming(&self, i: usize) -> &[(usize, f64)] {
        &self.incoming[i]
    }

    /// `(j, w_ij)` for every edge `i -> j`, sorted by `j`.
    pub fn outgoing(&self, i: usize) -> &[(usize, f64)] {
        &self.outgoing[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.incoming[i].len()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.outgoing[i].len()
    }

    /// Sum of incoming weights, `T_i = sum_j w_ji`.
    pub fn temperature(&self, i: usize) -> f64 {
        self.incoming[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.outgoing[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map(|k| self.outgoing[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec::new(self.n, self.edges.clone())
    }

    pub fn is_undirected(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.weight(e.target, e.source) > 0.0)
    }

    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|e| {
            let k = self.out_degree(e.source) as f64;
            (e.weight - 1.0 / k).abs() <= UNWEIGHTED_TOLERANCE
        })
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let forward = reachable(self.n, [0], |v| self.outgoing[v].iter().map(|&(j, _)| j));
        if forward.iter().any(|&r| !r) {
            return false;
        }
        let backward = reachable(self.n, [0], |v| self.incoming[v].iter().map(|&(j, _)| j));
        backward.iter().all(|&r| r)
    }

    /// True iff every vertex outside `config` has a directed path from some
    /// member of `config`. Vacuous when `config` covers every vertex.
    pub fn reaches_all(&self, config: &Configuration) -> bool {
        let seen = reachable(self.n, config.iter(), |v| {
            self.outgoing[v].iter().map(|&(j, _)| j)
        });
        seen.iter().all(|&r| r)
    }

    pub fn check_configuration(&self, config: &Configuration) -> Result<()> {
        match config.iter().find(|&v| v >= self.n) {
            Some(vertex) => Err(Error::VertexOutOfRange { vertex, n: self.n }),
            None => Ok(()),
        }
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.n;
        let is_unweighted = self.is_unweighted();
        let is_undirected = self.is_undirected();
        let in_degrees: Vec<_> = (0..n).map(|i| self.in_degree(i)).collect();
        let out_degrees: Vec<_> = (0..n).map(|i| self.out_degree(i)).collect();
        let mean_inverse_degree =
            if is_unweighted && is_undirected && out_degrees.iter().all(|&k| k > 0) {
                Some(out_degrees.iter().map(|&k| 1.0 / k as f64).sum::<f64>() / n as f64)
            } else {
                None
            };
        GraphStats {
            temperatures: (0..n).map(|i| self.temperature(i)).collect(),
            in_degrees,
            out_degrees,
            mean_inverse_degree,
            is_unweighted,
            is_undirected,
            is_strongly_connected: self.is_strongly_connected(),
        }
    }
}

fn reachable<I, F, J>(n: usize, sources: I, mut next: F) -> Vec<bool>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(usize) -> J,
    J: Iterator<Item = usize>,
{
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for s in sources {
        if s < n && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for j in next(v) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub temperatures: Vec<f64>,
    pub in_degrees: Vec<usize>,
    pub out_degrees: Vec<usize>,
    /// `<k^-1>`, only for undirected unweighted graphs without isolated vertices.
    pub mean_inverse_degree: Option<f64>,
    pub is_unweighted: bool,
    pub is_undirected: bool,
    pub is_strongly_connected: bool,
}

/// A set of mutant vertices. Stored sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Configuration(Vec<usize>);

impl From<Vec<usize>> for Configuration {
    fn from(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Configuration(ids)
    }
}

impl From<Configuration> for Vec<usize> {
    fn from(c: Configuration) -> Self {
        c.0
    }
}

impl FromIterator<usize> for Configuration {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().collect::<Vec<_>>().into()
    }
}

impl Configuration {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        ids.into_iter().collect()
    }

    pub fn empty() -> Self {
        Configuration(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        Configuration(vec![i])
    }

    pub fn all(n: usize) -> Self {
        Configuration((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// First shared vertex, if any.
    pub fn intersection_witness(&self, other: &Configuration) -> Option<usize> {
        self.iter().find(|&v| other.contains(v))
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        self.iter().chain(other.iter()).collect()
    }

    /// Bit `i` set iff vertex `i` is a mutant.
    pub fn to_bits(&self) -> u64 {
        self.iter().fold(0u64, |acc, v| acc | (1u64 << v))
    }

    pub fn from_bits(bits: u64, n: usize) -> Self {
        Configuration((0..n).filter(|&v| bits >> v & 1 == 1).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cycle() -> EvolutionaryGraph {
        EvolutionaryGraph::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)]).unwrap()
    }

    #[test]
    fn symmetric_two_cycle_is_valid() {
        let spec = GraphSpec::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)]);
        assert!(spec.validate().is_empty());
    }

    #[test]
    fn short_row_is_reported() {
        let spec = GraphSpec::new(2, vec![Edge::new(0, 1, 0.5)]);
        assert_eq!(
            spec.validate(),
            vec![Violation::RowSum {
                vertex: 0,
                sum: 0.5
            }]
        );
    }

    #[test]
    fn self_loop_is_reported() {
        let spec = GraphSpec::new(
            3,
            vec![
                Edge::new(0, 0, 0.2),
                Edge::new(0, 1, 0.8),
                Edge::new(1, 2, 1.0),
                Edge::new(2, 0, 1.0),
            ],
        );
        let v = spec.validate();
        assert!(v.contains(&Violation::SelfLoop { vertex: 0 }), "{v:?}");
    }

    #[test]
    fn all_violations_are_collected() {
        let spec = GraphSpec::new(
            2,
            vec![
                Edge::new(0, 5, 1.0),
                Edge::new(1, 0, 0.0),
                Edge::new(1, 0, 0.0),
            ],
        );
        let v = spec.validate();
        assert!(v.contains(&Violation::VertexOutOfRange {
            source: 0,
            target: 5
        }));
        assert!(v.contains(&Violation::DuplicateEdge {
            source: 1,
            target: 0
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NonPositiveWeight { source: 1, .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::RowSum { vertex: 1, .. })));
    }

    #[test]
    fn empty_graph_is_rejected() {
        assert_eq!(
            GraphSpec::new(0, vec![]).validate(),
            vec![Violation::EmptyGraph]
        );
    }

    #[test]
    fn rows_within_tolerance_are_renormalized() {
        let g = EvolutionaryGraph::new(
            2,
            vec![Edge::new(0, 1, 1.0 + 5e-10), Edge::new(1, 0, 1.0 - 5e-10)],
        )
        .unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 0), 1.0);
    }

    #[test]
    fn strong_connectivity() {
        let cycle = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(cycle.is_strongly_connected());
        let path = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!path.is_strongly_connected());
        let single = EvolutionaryGraph::new(1, vec![]).unwrap();
        assert!(single.is_strongly_connected());
    }

    #[test]
    fn reachability_from_configuration() {
        let path = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(path.reaches_all(&Configuration::singleton(0)));
        assert!(!path.reaches_all(&Configuration::singleton(2)));
        assert!(path.reaches_all(&Configuration::all(3)));
    }

    #[test]
    fn temperatures_and_degrees() {
        let g = two_cycle();
        let s = g.stats();
        assert_eq!(s.temperatures, vec![1.0, 1.0]);
        assert!(s.is_undirected && s.is_unweighted && s.is_strongly_connected);

        let path = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.temperature(0), 0.0);
    }

    #[test]
    fn mean_inverse_degree_of_path() {
        let path = EvolutionaryGraph::undirected(3, &[(0, 1), (1, 2)]).unwrap();
        let s = path.stats();
        let expected = (1.0 + 0.5 + 1.0) / 3.0;
        assert!((s.mean_inverse_degree.unwrap() - expected).abs() < 1e-15);
        assert!((expected - 5.0 / 6.0).abs() < 1e-15);
        // T_i = sum over neighbors of 1/k_j.
        assert!((s.temperatures[1] - 2.0).abs() < 1e-15);
        assert!((s.temperatures[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weighted_graph_has_no_mean_inverse_degree() {
        let g = EvolutionaryGraph::new(
            3,
            vec![
                Edge::new(0, 1, 0.3),
                Edge::new(0, 2, 0.7),
                Edge::new(1, 0, 1.0),
                Edge::new(2, 0, 1.0),
            ],
        )
        .unwrap();
        let s = g.stats();
        assert!(!s.is_unweighted);
        assert!(s.mean_inverse_degree.is_none());
    }

    #[test]
    fn configuration_is_normalized() {
        let c = Configuration::new([3, 1, 3, 0]);
        assert_eq!(c.as_slice(), &[0, 1, 3]);
        assert_eq!(c.to_bits(), 0b1011);
        assert_eq!(Configuration::from_bits(0b1011, 4), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "[0,1,3]");
    }

    #[test]
    fn spec_json_shape() {
        let spec = two_cycle().to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"n":2,"edges":[[0,1,1.0],[1,0,1.0]]}"#);
        let back: GraphSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
