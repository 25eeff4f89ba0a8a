//! Fixation probabilities by iterating vertex probabilities to agreement.
//!
//! Under neutral drift every step is a convex combination, so on a strongly
//! connected graph `min_i P[i] <= F_C <= max_i P[i]` at every step and the
//! bracket shrinks to the fixation probability. Stopping once the half-width
//! `tau` of the bracket is at most `epsilon` and returning `min + tau`
//! (the bracket midpoint) is then within `epsilon` of `F_C`.
//!
//! The [`Criterion::Stdev`] variant stops on the standard deviation of the
//! vector and returns its mean instead. It carries no error guarantee but
//! usually gets close much sooner.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{NeutralRule, ProbabilityVector, Propagator, Summary};
use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: u64 = 10_000_000;
/// Iterations without any decrease of the stopping statistic before giving up.
pub const DEFAULT_STALL_WINDOW: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Half the spread of the vector; returns `min + tau`.
    #[default]
    Range,
    /// Population standard deviation; returns the mean.
    Stdev,
}

impl Criterion {
    fn tau(self, s: &Summary) -> f64 {
        match self {
            Criterion::Range => s.half_range(),
            Criterion::Stdev => s.stdev,
        }
    }

    fn estimate(self, s: &Summary) -> f64 {
        match self {
            Criterion::Range => s.min + s.half_range(),
            Criterion::Stdev => s.avg,
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "range" => Ok(Criterion::Range),
            "stdev" | "acc" => Ok(Criterion::Stdev),
            other => Err(Error::Parse(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub rule: NeutralRule,
    pub epsilon: f64,
    pub criterion: Criterion,
    pub max_iters: u64,
    pub stall_window: u64,
    pub record_trajectory: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rule: NeutralRule::Bd,
            epsilon: DEFAULT_EPSILON,
            criterion: Criterion::Range,
            max_iters: DEFAULT_MAX_ITERS,
            stall_window: DEFAULT_STALL_WINDOW,
            record_trajectory: false,
        }
    }
}

impl SolveOptions {
    pub fn new(rule: NeutralRule, epsilon: f64) -> Self {
        SolveOptions {
            rule,
            epsilon,
            ..Default::default()
        }
    }

    pub fn criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn max_iters(mut self, max_iters: u64) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn record_trajectory(mut self, yes: bool) -> Self {
        self.record_trajectory = yes;
        self
    }
}

/// One row of a convergence or expected-mutant trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub stdev: f64,
    /// Expected number of mutants, `sum_i P[i]`.
    pub ex: f64,
}

impl TraceRow {
    fn of(t: u64, values: &[f64]) -> Self {
        let s = Summary::of(values);
        TraceRow {
            t,
            min: s.min,
            max: s.max,
            avg: s.avg,
            stdev: s.stdev,
            ex: values.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub fixation: f64,
    /// Final value of the stopping statistic.
    pub half_range: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Stopped because the statistic stopped decreasing.
    pub stalled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TraceRow>>,
    pub final_vector: ProbabilityVector,
}

/// `(min, max)` of a vector: a bracket on the fixation probability.
pub fn bracket(p: &ProbabilityVector) -> (f64, f64) {
    let s = p.summary();
    (s.min, s.max)
}

/// Fixation probability of `config` under a neutral rule.
///
/// Refuses graphs that are not strongly connected; use [`trajectory`] there.
pub fn solve(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    options: &SolveOptions,
) -> Result<SolveReport> {
    if options.max_iters == 0 {
        return Err(Error::InvalidParameter(
            "max_iters must be at least 1".into(),
        ));
    }
    if options.epsilon.is_nan() || options.epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be >= 0, got {}",
            options.epsilon
        )));
    }
    graph.check_configuration(config)?;
    if !graph.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let mut prop = Propagator::new(graph, config, options.rule)?;
    let criterion = options.criterion;

    let mut trajectory = options
        .record_trajectory
        .then(|| vec![TraceRow::of(0, prop.values())]);
    let mut summary = prop.summary();
    let mut tau = criterion.tau(&summary);
    let mut best = tau;
    let mut since_best = 0;
    let mut stalled = false;

    while tau > options.epsilon && prop.t() < options.max_iters {
        prop.step();
        summary = prop.summary();
        tau = criterion.tau(&summary);
        if let Some(rows) = trajectory.as_mut() {
            rows.push(TraceRow::of(prop.t(), prop.values()));
        }
        if tau < best {
            best = tau;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= options.stall_window {
                stalled = true;
                break;
            }
        }
    }

    Ok(SolveReport {
        fixation: criterion.estimate(&summary),
        half_range: tau,
        lower: summary.min,
        upper: summary.max,
        iterations: prop.t(),
        converged: tau <= options.epsilon,
        stalled,
        trajectory,
        final_vector: prop.vector(),
    })
}

/// Per-step statistics for `steps` updates, rows `t = 0..=steps`.
///
/// Works on any graph, strongly connected or not.
pub fn trajectory(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: NeutralRule,
    steps: u64,
) -> Result<Vec<TraceRow>> {
    let mut prop = Propagator::new(graph, config, rule)?;
    let mut rows = Vec::with_capacity(steps as usize + 1);
    rows.push(TraceRow::of(0, prop.values()));
    for _ in 0..steps {
        prop.step();
        #[cfg(debug_assertions)]
        if rule == NeutralRule::Bd {
            let prev = ProbabilityVector {
                values: prop.previous().to_vec(),
                t: prop.t() - 1,
            };
            let residual =
                crate::dynamics::expected_mutants_recurrence_check(graph, &prev, &prop.vector());
            debug_assert!(
                residual <= 1e-12 * graph.n() as f64,
                "recurrence residual {residual}"
            );
        }
        rows.push(TraceRow::of(prop.t(), prop.values()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Additivity {
    pub first: f64,
    pub second: f64,
    pub union: f64,
    /// `|first + second - union|`.
    pub defect: f64,
}

/// Solves two disjoint configurations and their union.
pub fn additivity_check(
    graph: &EvolutionaryGraph,
    c1: &Configuration,
    c2: &Configuration,
    options: &SolveOptions,
) -> Result<Additivity> {
    if let Some(vertex) = c1.intersection_witness(c2) {
        return Err(Error::OverlappingConfigurations { vertex });
    }
    let first = solve(graph, c1, options)?.fixation;
    let second = solve(graph, c2, options)?.fixation;
    let union = solve(graph, &c1.union(c2), options)?.fixation;
    Ok(Additivity {
        first,
        second,
        union,
        defect: (first + second - union).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// Limit of the expected number of mutants.
    pub expected_mutants_limit: f64,
    pub fixation: f64,
}

/// Single-mutant limits on undirected unweighted graphs.
///
/// BD: `lim Ex = 1 / (k_i <k^-1>)`, `F = lim Ex / N`.
/// DB: `F = k_i / (2 Theta)` with `Theta` the number of undirected edges.
pub fn undirected_closed_form(
    graph: &EvolutionaryGraph,
    i: usize,
    rule: NeutralRule,
) -> Result<ClosedForm> {
    if i >= graph.n() {
        return Err(Error::VertexOutOfRange {
            vertex: i,
            n: graph.n(),
        });
    }
    let stats = graph.stats();
    let mean_inv = stats
        .mean_inverse_degree
        .ok_or(Error::NotUndirectedUnweighted)?;
    let n = graph.n() as f64;
    let k = graph.out_degree(i) as f64;
    match rule {
        NeutralRule::Bd => {
            let ex = 1.0 / (k * mean_inv);
            Ok(ClosedForm {
                expected_mutants_limit: ex,
                fixation: ex / n,
            })
        }
        NeutralRule::Db => {
            let theta = graph.edge_count() as f64 / 2.0;
            let fixation = k / (2.0 * theta);
            Ok(ClosedForm {
                expected_mutants_limit: fixation * n,
                fixation,
            })
        }
        NeutralRule::Ld => Err(Error::InvalidParameter(
            "closed form is available for bd and db only".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexClass {
    Amplifier,
    Suppressor,
    Neutral,
}

/// Labels each vertex of an undirected unweighted graph by comparing its
/// degree with `1 / <k^-1>`: below amplifies, above suppresses.
pub fn classify_vertices(graph: &EvolutionaryGraph) -> Result<Vec<VertexClass>> {
    let mean_inv = graph
        .stats()
        .mean_inverse_degree
        .ok_or(Error::NotUndirectedUnweighted)?;
    let threshold = 1.0 / mean_inv;
    Ok((0..graph.n())
        .map(|i| {
            let k = graph.out_degree(i) as f64;
            if (k - threshold).abs() <= 1e-9 * threshold {
                VertexClass::Neutral
            } else if k < threshold {
                VertexClass::Amplifier
            } else {
                VertexClass::Suppressor
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn two_cycle() -> EvolutionaryGraph {
        EvolutionaryGraph::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)]).unwrap()
    }

    fn path3() -> EvolutionaryGraph {
        EvolutionaryGraph::undirected(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn two_cycle_converges_in_one_step() {
        let r = solve(
            &two_cycle(),
            &Configuration::singleton(0),
            &SolveOptions::new(NeutralRule::Bd, 1e-9),
        )
        .unwrap();
        assert_eq!(r.fixation, 0.5);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn directed_three_cycle_is_one_third() {
        let g = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let eps = 1e-10;
        let r = solve(
            &g,
            &Configuration::singleton(0),
            &SolveOptions::new(NeutralRule::Bd, eps),
        )
        .unwrap();
        assert!((r.fixation - 1.0 / 3.0).abs() <= eps);
        assert!(r.lower <= r.fixation && r.fixation <= r.upper);
    }

    #[test]
    fn path_center_is_one_fifth() {
        let eps = 1e-10;
        let r = solve(
            &path3(),
            &Configuration::singleton(1),
            &SolveOptions::new(NeutralRule::Bd, eps),
        )
        .unwrap();
        assert!((r.fixation - 0.2).abs() <= eps, "{}", r.fixation);
    }

    #[test]
    fn full_and_empty_configurations() {
        let g = path3();
        let r = solve(&g, &Configuration::all(3), &SolveOptions::default()).unwrap();
        assert_eq!(r.fixation, 1.0);
        assert_eq!(r.iterations, 0);
        let r = solve(&g, &Configuration::empty(), &SolveOptions::default()).unwrap();
        assert_eq!(r.fixation, 0.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn refuses_non_strongly_connected() {
        let g = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            solve(&g, &Configuration::singleton(0), &SolveOptions::default()),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn iteration_cap_reports_bracket() {
        let opts = SolveOptions::new(NeutralRule::Bd, 1e-12).max_iters(3);
        let r = solve(&path3(), &Configuration::singleton(1), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.lower <= 0.2 && 0.2 <= r.upper);
    }

    #[test]
    fn stdev_criterion_returns_mean() {
        let opts = SolveOptions::new(NeutralRule::Bd, 1e-9).criterion(Criterion::Stdev);
        let r = solve(&path3(), &Configuration::singleton(1), &opts).unwrap();
        let avg = r.final_vector.summary().avg;
        assert_eq!(r.fixation, avg);
        assert!((r.fixation - 0.2).abs() < 1e-8);
    }

    #[test]
    fn brackets() {
        let p = ProbabilityVector {
            values: vec![1.0, 0.0, 0.0],
            t: 0,
        };
        assert_eq!(bracket(&p), (0.0, 1.0));
        let p = ProbabilityVector {
            values: vec![0.5, 0.5],
            t: 1,
        };
        assert_eq!(bracket(&p), (0.5, 0.5));

        let g = path3();
        let mut prop = Propagator::new(&g, &Configuration::singleton(1), NeutralRule::Bd).unwrap();
        for _ in 0..50 {
            prop.step();
        }
        let (lo, hi) = bracket(&prop.vector());
        assert!(lo <= 0.2 && 0.2 <= hi);
    }

    #[test]
    fn trajectory_rows() {
        let rows = trajectory(
            &two_cycle(),
            &Configuration::singleton(0),
            NeutralRule::Bd,
            3,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.ex == 1.0));
        let rows = trajectory(&path3(), &Configuration::empty(), NeutralRule::Db, 5).unwrap();
        assert!(rows.iter().all(|r| r.ex == 0.0 && r.max == 0.0));
        let rows = trajectory(&path3(), &Configuration::singleton(0), NeutralRule::Bd, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t, 0);
    }

    #[test]
    fn additivity_on_three_cycle() {
        let g = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let eps = 1e-9;
        let a = additivity_check(
            &g,
            &Configuration::singleton(0),
            &Configuration::singleton(1),
            &SolveOptions::new(NeutralRule::Bd, eps),
        )
        .unwrap();
        assert!((a.union - 2.0 / 3.0).abs() <= eps);
        assert!(a.defect <= 3.0 * eps);
        assert!(matches!(
            additivity_check(
                &g,
                &Configuration::new([0, 1]),
                &Configuration::new([1]),
                &SolveOptions::default()
            ),
            Err(Error::OverlappingConfigurations { vertex: 1 })
        ));
    }

    #[test]
    fn closed_forms() {
        // K_N: lim Ex = 1, F = 1/N.
        let pairs: Vec<_> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        let k5 = EvolutionaryGraph::undirected(5, &pairs).unwrap();
        let c = undirected_closed_form(&k5, 2, NeutralRule::Bd).unwrap();
        assert!((c.expected_mutants_limit - 1.0).abs() < 1e-12);
        assert!((c.fixation - 0.2).abs() < 1e-12);

        let c = undirected_closed_form(&path3(), 0, NeutralRule::Bd).unwrap();
        assert!((c.expected_mutants_limit - 1.2).abs() < 1e-12);
        assert!((c.fixation - 0.4).abs() < 1e-12);

        let c = undirected_closed_form(&path3(), 1, NeutralRule::Db).unwrap();
        assert!((c.fixation - 0.5).abs() < 1e-12);

        let weighted = EvolutionaryGraph::new(
            3,
            vec![
                Edge::new(0, 1, 0.3),
                Edge::new(0, 2, 0.7),
                Edge::new(1, 0, 1.0),
                Edge::new(2, 0, 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            undirected_closed_form(&weighted, 0, NeutralRule::Bd),
            Err(Error::NotUndirectedUnweighted)
        ));
    }

    #[test]
    fn amplifier_labels() {
        let path = classify_vertices(&path3()).unwrap();
        assert_eq!(
            path,
            vec![
                VertexClass::Amplifier,
                VertexClass::Suppressor,
                VertexClass::Amplifier
            ]
        );

        let c4 = EvolutionaryGraph::undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(classify_vertices(&c4)
            .unwrap()
            .iter()
            .all(|&c| c == VertexClass::Neutral));

        let star = EvolutionaryGraph::undirected(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let labels = classify_vertices(&star).unwrap();
        assert_eq!(labels[0], VertexClass::Suppressor);
        assert!(labels[1..].iter().all(|&c| c == VertexClass::Amplifier));
    }
}
