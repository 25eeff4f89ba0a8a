//! Seeded random-graph generators.
//!
//! Undirected growth models are turned into digraphs by replacing each
//! undirected edge with two arcs. Weights are either `1 / k_out` or drawn
//! uniformly from `(0, 1]` per arc and normalized per source vertex.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EvolutionaryGraph};

/// How many fresh draws a generator gets before it reports failure.
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Barabási–Albert growth; each new vertex attaches to `m` existing ones.
    PreferentialAttachment { m: usize },
    /// Undirected G(n, p).
    ErdosRenyi { p: f64 },
    /// Newman–Watts: ring where each vertex joins its `k` nearest neighbors,
    /// plus a shortcut per ring edge with probability `p`. No rewiring.
    SmallWorld { k: usize, p: f64 },
    /// Directed G(n, p) over ordered pairs, kept only if strongly connected.
    DirectedErdosRenyi { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    Random,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unweighted" | "u" => Ok(Weighting::Unweighted),
            "random" | "r" => Ok(Weighting::Random),
            other => Err(Error::Parse(format!("unknown weighting {other:?}"))),
        }
    }
}

/// Everything needed to regenerate a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GraphKind,
    pub n: usize,
    pub weighting: Weighting,
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<EvolutionaryGraph> {
        generate(self.kind, self.n, seed, self.weighting)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = match self.weighting {
            Weighting::Unweighted => "unweighted",
            Weighting::Random => "random",
        };
        match self.kind {
            GraphKind::PreferentialAttachment { m } => write!(f, "pa:n={},m={m},w={w}", self.n),
            GraphKind::ErdosRenyi { p } => write!(f, "er:n={},p={p},w={w}", self.n),
            GraphKind::SmallWorld { k, p } => write!(f, "sw:n={},k={k},p={p},w={w}", self.n),
            GraphKind::DirectedErdosRenyi { p } => write!(f, "der:n={},p={p},w={w}", self.n),
        }
    }
}

/// Parses `kind:key=value,...`, e.g. `pa:n=100,m=1,w=random` or
/// `sw:n=100,k=2,p=0.5`. Kinds: `pa`, `er`, `sw`, `der`.
impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected kind:params, got {s:?}")))?;
        let mut n = None;
        let mut m = None;
        let mut p = None;
        let mut k = None;
        let mut weighting = Weighting::Unweighted;
        for pair in rest.split(',').filter(|x| !x.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))?;
            let bad = || Error::Parse(format!("bad value for {key}: {value:?}"));
            match key {
                "n" => n = Some(value.parse().map_err(|_| bad())?),
                "m" => m = Some(value.parse().map_err(|_| bad())?),
                "k" => k = Some(value.parse().map_err(|_| bad())?),
                "p" => p = Some(value.parse().map_err(|_| bad())?),
                "w" | "weights" | "weighting" => weighting = value.parse()?,
                other => return Err(Error::Parse(format!("unknown generator key {other:?}"))),
            }
        }
        let missing = |what: &str| Error::Parse(format!("generator {kind:?} needs {what}"));
        let kind = match kind {
            "pa" | "ba" | "preferential_attachment" => GraphKind::PreferentialAttachment {
                m: m.ok_or_else(|| missing("m"))?,
            },
            "er" | "erdos_renyi" => GraphKind::ErdosRenyi {
                p: p.ok_or_else(|| missing("p"))?,
            },
            "sw" | "nws" | "small_world" => GraphKind::SmallWorld {
                k: k.ok_or_else(|| missing("k"))?,
                p: p.ok_or_else(|| missing("p"))?,
            },
            "der" | "directed_erdos_renyi" => GraphKind::DirectedErdosRenyi {
                p: p.ok_or_else(|| missing("p"))?,
            },
            other => return Err(Error::Parse(format!("unknown generator kind {other:?}"))),
        };
        Ok(GeneratorSpec {
            kind,
            n: n.ok_or_else(|| missing("n"))?,
            weighting,
        })
    }
}

pub fn generate(
    kind: GraphKind,
    n: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<EvolutionaryGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n must be at least 2, got {n}"
        )));
    }
    let check_p = |p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {p}"
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        GraphKind::PreferentialAttachment { m } => {
            if m == 0 || m >= n {
                return Err(Error::InvalidParameter(format!(
                    "attachment count m must satisfy 1 <= m < n, got m={m}, n={n}"
                )));
            }
            let pairs = barabasi_albert(n, m, &mut rng);
            build(n, symmetric_arcs(&pairs), weighting, &mut rng)
        }
        GraphKind::ErdosRenyi { p } => {
            check_p(p)?;
            retry(
                |rng| {
                    let pairs = gnp_pairs(n, p, rng);
                    build(n, symmetric_arcs(&pairs), weighting, rng)
                },
                &mut rng,
            )
        }
        GraphKind::SmallWorld { k, p } => {
            check_p(p)?;
            if k < 2 || k >= n {
                return Err(Error::InvalidParameter(format!(
                    "ring degree k must satisfy 2 <= k < n, got k={k}, n={n}"
                )));
            }
            let pairs = newman_watts(n, k, p, &mut rng);
            build(n, symmetric_arcs(&pairs), weighting, &mut rng)
        }
        GraphKind::DirectedErdosRenyi { p } => {
            check_p(p)?;
            retry(
                |rng| {
                    let arcs: Vec<_> = (0..n)
                        .flat_map(|i| (0..n).map(move |j| (i, j)))
                        .filter(|&(i, j)| i != j)
                        .filter(|_| rng.random::<f64>() < p)
                        .collect();
                    build(n, arcs, weighting, rng)
                },
                &mut rng,
            )
        }
    }
}

/// Adds a permanent mutant source `n` with a single arc into `con_mn` and a
/// permanent resident source `n + 1` with a single arc into `con_rn`.
///
/// Neither source has incoming edges, so under BD or LD their vertex
/// probabilities stay at their initial values. Start from the configuration
/// `{n}` to watch the core settle between the two. The result is not
/// strongly connected, so only [`crate::solver::trajectory`] applies.
pub fn with_fixed_sources(
    core: &EvolutionaryGraph,
    con_mn: usize,
    con_rn: usize,
) -> Result<EvolutionaryGraph> {
    let n = core.n();
    for v in [con_mn, con_rn] {
        if v >= n {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
    }
    let mut edges = core.edges().to_vec();
    edges.push(Edge::new(n, con_mn, 1.0));
    edges.push(Edge::new(n + 1, con_rn, 1.0));
    EvolutionaryGraph::new(n + 2, edges)
}

fn retry<F>(mut attempt: F, rng: &mut ChaCha8Rng) -> Result<EvolutionaryGraph>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<EvolutionaryGraph>,
{
    for _ in 0..MAX_ATTEMPTS {
        let g = attempt(rng)?;
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::GeneratorExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

fn symmetric_arcs(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

fn build(
    n: usize,
    mut arcs: Vec<(usize, usize)>,
    weighting: Weighting,
    rng: &mut ChaCha8Rng,
) -> Result<EvolutionaryGraph> {
    arcs.sort_unstable();
    arcs.dedup();
    match weighting {
        Weighting::Unweighted => EvolutionaryGraph::from_arcs(n, &arcs),
        Weighting::Random => {
            // uniform on (0, 1]
            let raw: Vec<f64> = arcs.iter().map(|_| 1.0 - rng.random::<f64>()).collect();
            let mut row_sum = vec![0.0; n];
            for (&(i, _), &w) in arcs.iter().zip(&raw) {
                row_sum[i] += w;
            }
            let edges = arcs
                .iter()
                .zip(&raw)
                .map(|(&(i, j), &w)| Edge::new(i, j, w / row_sum[i]))
                .collect();
            EvolutionaryGraph::new(n, edges)
        }
    }
}

/// Starts from a star on `m + 1` vertices; each later vertex attaches to `m`
/// distinct targets drawn proportionally to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (1..=m).map(|v| (0, v)).collect();
    let mut endpoints: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    for source in (m + 1)..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(endpoints[rng.random_range(0..endpoints.len())]);
        }
        for &t in &targets {
            pairs.push((t, source));
            endpoints.push(t);
            endpoints.push(source);
        }
    }
    pairs
}

fn gnp_pairs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn newman_watts(n: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut ring = Vec::new();
    for offset in 1..=(k / 2) {
        for u in 0..n {
            ring.push((u, (u + offset) % n));
        }
    }
    let mut present: BTreeSet<(usize, usize)> = ring.iter().map(|&(a, b)| key(a, b)).collect();
    let mut degree = vec![0usize; n];
    for &(a, b) in &present {
        degree[a] += 1;
        degree[b] += 1;
    }
    for &(u, _) in &ring {
        if rng.random::<f64>() >= p {
            continue;
        }
        if degree[u] >= n - 1 {
            continue;
        }
        let mut w = rng.random_range(0..n);
        while w == u || present.contains(&key(u, w)) {
            w = rng.random_range(0..n);
        }
        present.insert(key(u, w));
        degree[u] += 1;
        degree[w] += 1;
    }
    present.into_iter().collect()
}
