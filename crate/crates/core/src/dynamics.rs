//! Vertex-probability kernels.
//!
//! `P[i]` is the probability that vertex `i` is a mutant after `t` update
//! events, given the initial configuration. Under neutral drift each update
//! rule maps the previous vector to the next one linearly:
//!
//! * BD: `P'[i] = P[i] + (1/N) * sum_{j->i} w_ji * (P[j] - P[i])`
//! * DB: `P'[i] = (1 - 1/N) * P[i] + 1/(N * k_in(i)) * sum_{j->i} P[j]`
//! * LD: `P'[i] = (1 - k_in(i)/|E|) * P[i] + (1/|E|) * sum_{j->i} P[j]`
//!
//! DB and LD select neighbors and edges uniformly, so they see only the
//! topology of the graph and never its weights.
//!
//! The maps are synchronous: every entry of the new vector is computed from
//! the old one. With fitness `r != 1` the probability that a given vertex
//! reproduces depends on the whole configuration, so no closed per-vertex
//! recurrence exists; biased rules are handled by simulation, the exact
//! chain, and the bounds in [`crate::bounds`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};

/// Neutral-drift update rule families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeutralRule {
    /// Birth-death (invasion process).
    Bd,
    /// Death-birth (voter model).
    Db,
    /// Link dynamics.
    Ld,
}

/// Fitness-biased update rules. At `r = 1` each collapses onto its family's
/// neutral kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiasedRule {
    /// Reproducer drawn proportional to fitness, victim by weight.
    #[serde(rename = "bd-b")]
    BdB,
    /// Reproducer uniform, victim by weight over fitness.
    #[serde(rename = "bd-d")]
    BdD,
    /// Victim uniform, replacing in-neighbor proportional to fitness.
    #[serde(rename = "db-b")]
    DbB,
    /// Victim proportional to inverse fitness, in-neighbor uniform.
    #[serde(rename = "db-d")]
    DbD,
    /// Edge drawn proportional to its source's fitness.
    #[serde(rename = "ld")]
    Ld,
}

impl NeutralRule {
    pub const ALL: [NeutralRule; 3] = [NeutralRule::Bd, NeutralRule::Db, NeutralRule::Ld];

    pub fn name(self) -> &'static str {
        match self {
            NeutralRule::Bd => "bd",
            NeutralRule::Db => "db",
            NeutralRule::Ld => "ld",
        }
    }

    /// The biased rule whose `r = 1` case this is.
    pub fn as_biased(self) -> BiasedRule {
        match self {
            NeutralRule::Bd => BiasedRule::BdB,
            NeutralRule::Db => BiasedRule::DbB,
            NeutralRule::Ld => BiasedRule::Ld,
        }
    }

    /// Whether the kernel is defined on this graph.
    pub fn check(self, graph: &EvolutionaryGraph) -> Result<()> {
        match self {
            NeutralRule::Bd => Ok(()),
            NeutralRule::Db => match (0..graph.n()).find(|&i| graph.in_degree(i) == 0) {
                Some(vertex) if graph.n() > 1 => Err(Error::NoIncomingEdge { vertex, rule: "db" }),
                _ => Ok(()),
            },
            NeutralRule::Ld if graph.edge_count() == 0 && graph.n() > 1 => {
                Err(Error::NoEdges { rule: "ld" })
            }
            NeutralRule::Ld => Ok(()),
        }
    }
}

impl BiasedRule {
    pub const ALL: [BiasedRule; 5] = [
        BiasedRule::BdB,
        BiasedRule::BdD,
        BiasedRule::DbB,
        BiasedRule::DbD,
        BiasedRule::Ld,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BiasedRule::BdB => "bd-b",
            BiasedRule::BdD => "bd-d",
            BiasedRule::DbB => "db-b",
            BiasedRule::DbD => "db-d",
            BiasedRule::Ld => "ld",
        }
    }

    pub fn family(self) -> NeutralRule {
        match self {
            BiasedRule::BdB | BiasedRule::BdD => NeutralRule::Bd,
            BiasedRule::DbB | BiasedRule::DbD => NeutralRule::Db,
            BiasedRule::Ld => NeutralRule::Ld,
        }
    }
}

impl fmt::Display for NeutralRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for BiasedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Any rule accepted on the command line: `bd`, `db`, `ld`, `bd-b`, `bd-d`,
/// `db-b`, `db-d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Rule {
    Neutral(NeutralRule),
    Biased(BiasedRule),
}

impl Rule {
    /// Neutral kernel for deterministic computations.
    pub fn family(self) -> NeutralRule {
        match self {
            Rule::Neutral(n) => n,
            Rule::Biased(b) => b.family(),
        }
    }

    /// Stochastic process for simulation and the exact chain.
    pub fn biased(self) -> BiasedRule {
        match self {
            Rule::Neutral(n) => n.as_biased(),
            Rule::Biased(b) => b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Neutral(n) => n.name(),
            Rule::Biased(b) => b.name(),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "bd" => Rule::Neutral(NeutralRule::Bd),
            "db" => Rule::Neutral(NeutralRule::Db),
            "ld" => Rule::Neutral(NeutralRule::Ld),
            "bd-b" => Rule::Biased(BiasedRule::BdB),
            "bd-d" => Rule::Biased(BiasedRule::BdD),
            "db-b" => Rule::Biased(BiasedRule::DbB),
            "db-d" => Rule::Biased(BiasedRule::DbD),
            other => return Err(Error::Parse(format!("unknown update rule {other:?}"))),
        })
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> String {
        r.name().to_string()
    }
}

impl TryFrom<String> for Rule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NeutralRule> for Rule {
    fn from(r: NeutralRule) -> Self {
        Rule::Neutral(r)
    }
}

impl From<BiasedRule> for Rule {
    fn from(r: BiasedRule) -> Self {
        Rule::Biased(r)
    }
}

/// Per-vertex mutant probabilities after `t` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub values: Vec<f64>,
    pub t: u64,
}

impl ProbabilityVector {
    /// Degenerate start: 1 on the configuration, 0 elsewhere.
    pub fn initial(graph: &EvolutionaryGraph, config: &Configuration) -> Result<Self> {
        graph.check_configuration(config)?;
        let mut values = vec![0.0; graph.n()];
        for i in config.iter() {
            values[i] = 1.0;
        }
        Ok(ProbabilityVector { values, t: 0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Expected number of mutants, `sum_i P[i]`.
    pub fn expected_mutants(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.values)
    }
}

/// Shorthand for [`ProbabilityVector::initial`].
pub fn init_vector(graph: &EvolutionaryGraph, config: &Configuration) -> Result<ProbabilityVector> {
    ProbabilityVector::initial(graph, config)
}

/// min / max / mean / population standard deviation of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub stdev: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let avg = sum / n;
        let var = values.iter().map(|&v| (v - avg) * (v - avg)).sum::<f64>() / n;
        Summary {
            min,
            max,
            avg,
            stdev: var.sqrt(),
        }
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

/// Writes one synchronous update of `prev` into `next`.
///
/// The caller must have run [`NeutralRule::check`]; lengths must match.
pub(crate) fn step_into(
    rule: NeutralRule,
    graph: &EvolutionaryGraph,
    prev: &[f64],
    next: &mut [f64],
) {
    let n = graph.n() as f64;
    match rule {
        NeutralRule::Bd => {
            for (i, out) in next.iter_mut().enumerate() {
                let pi = prev[i];
                let sum: f64 = graph
                    .incoming(i)
                    .iter()
                    .map(|&(j, w)| w * (prev[j] - pi))
                    .sum();
                *out = (pi + sum / n).clamp(0.0, 1.0);
            }
        }
        NeutralRule::Db => {
            for (i, out) in next.iter_mut().enumerate() {
                let inc = graph.incoming(i);
                if inc.is_empty() {
                    *out = prev[i];
                    continue;
                }
                let sum: f64 = inc.iter().map(|&(j, _)| prev[j]).sum();
                *out = ((1.0 - 1.0 / n) * prev[i] + sum / (n * inc.len() as f64)).clamp(0.0, 1.0);
            }
        }
        NeutralRule::Ld => {
            let e = graph.edge_count() as f64;
            for (i, out) in next.iter_mut().enumerate() {
                let inc = graph.incoming(i);
                if inc.is_empty() {
                    *out = prev[i];
                    continue;
                }
                let sum: f64 = inc.iter().map(|&(j, _)| prev[j]).sum();
                *out = ((1.0 - inc.len() as f64 / e) * prev[i] + sum / e).clamp(0.0, 1.0);
            }
        }
    }
}

/// One update of the vertex probabilities under a neutral rule.
pub fn step(
    rule: NeutralRule,
    graph: &EvolutionaryGraph,
    p: &ProbabilityVector,
) -> Result<ProbabilityVector> {
    if p.len() != graph.n() {
        return Err(Error::LengthMismatch {
            expected: graph.n(),
            got: p.len(),
        });
    }
    rule.check(graph)?;
    let mut values = vec![0.0; graph.n()];
    step_into(rule, graph, &p.values, &mut values);
    Ok(ProbabilityVector { values, t: p.t + 1 })
}

pub fn step_bd(graph: &EvolutionaryGraph, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    step(NeutralRule::Bd, graph, p)
}

pub fn step_db(graph: &EvolutionaryGraph, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    step(NeutralRule::Db, graph, p)
}

pub fn step_ld(graph: &EvolutionaryGraph, p: &ProbabilityVector) -> Result<ProbabilityVector> {
    step(NeutralRule::Ld, graph, p)
}

/// Right-hand side of the expected-mutant recurrence under BD:
/// `Ex + Ex/N - (1/N) * sum_i T_i * P[i]`.
pub fn expected_mutants_next(graph: &EvolutionaryGraph, p_prev: &ProbabilityVector) -> f64 {
    let n = graph.n() as f64;
    let ex = p_prev.expected_mutants();
    let hot: f64 = p_prev
        .values
        .iter()
        .enumerate()
        .map(|(i, &p)| graph.temperature(i) * p)
        .sum();
    ex + ex / n - hot / n
}

/// `|sum(p_next) - expected_mutants_next(p_prev)|`; near zero whenever
/// `p_next` is the BD step of `p_prev`.
pub fn expected_mutants_recurrence_check(
    graph: &EvolutionaryGraph,
    p_prev: &ProbabilityVector,
    p_next: &ProbabilityVector,
) -> f64 {
    (p_next.expected_mutants() - expected_mutants_next(graph, p_prev)).abs()
}

/// Iterates a neutral kernel from an initial configuration, reusing buffers.
#[derive(Debug, Clone)]
pub struct Propagator<'g> {
    graph: &'g EvolutionaryGraph,
    rule: NeutralRule,
    current: Vec<f64>,
    scratch: Vec<f64>,
    t: u64,
}

impl<'g> Propagator<'g> {
    pub fn new(
        graph: &'g EvolutionaryGraph,
        config: &Configuration,
        rule: NeutralRule,
    ) -> Result<Self> {
        rule.check(graph)?;
        let start = ProbabilityVector::initial(graph, config)?;
        Ok(Propagator {
            graph,
            rule,
            scratch: vec![0.0; graph.n()],
            current: start.values,
            t: 0,
        })
    }

    pub fn step(&mut self) {
        step_into(self.rule, self.graph, &self.current, &mut self.scratch);
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.t += 1;
    }

    /// The vector before the most recent [`step`](Self::step).
    pub fn previous(&self) -> &[f64] {
        &self.scratch
    }

    pub fn values(&self) -> &[f64] {
        &self.current
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.current)
    }

    pub fn vector(&self) -> ProbabilityVector {
        ProbabilityVector {
            values: self.current.clone(),
            t: self.t,
        }
    }

    pub fn graph(&self) -> &'g EvolutionaryGraph {
        self.graph
    }

    pub fn rule(&self) -> NeutralRule {
        self.rule
    }
}
