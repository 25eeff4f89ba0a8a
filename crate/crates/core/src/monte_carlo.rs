//! Direct simulation of the biased processes.
//!
//! Fitness is `r` for mutants and 1 for residents. One event of each rule:
//!
//! - `bd-b`: parent drawn proportional to fitness, offspring replaces an
//!   out-neighbor `j` with probability `w_ij`.
//! - `bd-d`: parent uniform, victim `j` proportional to `w_ij / f_j`.
//! - `db-b`: victim uniform, replaced by an in-neighbor drawn proportional
//!   to fitness.
//! - `db-d`: victim drawn proportional to `1 / f`, replaced by a uniform
//!   in-neighbor.
//! - `ld`: an edge drawn proportional to the fitness of its source.
//!
//! These are the same transition probabilities the exact chain in
//! [`crate::oracle`] uses, which is what the calibration tests pin down.
//!
//! Run `k` of an ensemble with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `k`, so results do not depend on
//! scheduling or thread count, and run 0 replays [`simulate_run`] with the
//! same seed.

use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BiasedRule, NeutralRule, Propagator};
use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};
use crate::solver::{solve, Criterion, SolveOptions, DEFAULT_MAX_ITERS};

pub const DEFAULT_RUNS: u64 = 2000;
/// Events allowed per run, per vertex.
pub const STEP_CAP_PER_VERTEX: u64 = 1_000_000;

pub fn default_step_cap(n: usize) -> u64 {
    STEP_CAP_PER_VERTEX.saturating_mul(n as u64)
}

fn rng_for(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Mutant set with O(1) uniform draws from either type.
#[derive(Debug, Clone)]
pub struct Population {
    mutant: Vec<bool>,
    // buckets[0] residents, buckets[1] mutants
    buckets: [Vec<usize>; 2],
    pos: Vec<usize>,
}

impl Population {
    pub fn new(n: usize, config: &Configuration) -> Self {
        let mut pop = Population {
            mutant: vec![false; n],
            buckets: [Vec::with_capacity(n), Vec::with_capacity(n)],
            pos: vec![0; n],
        };
        for v in 0..n {
            let b = config.contains(v) as usize;
            pop.mutant[v] = b == 1;
            pop.pos[v] = pop.buckets[b].len();
            pop.buckets[b].push(v);
        }
        pop
    }

    pub fn n(&self) -> usize {
        self.mutant.len()
    }

    pub fn mutants(&self) -> usize {
        self.buckets[1].len()
    }

    pub fn is_mutant(&self, v: usize) -> bool {
        self.mutant[v]
    }

    pub fn is_absorbed(&self) -> bool {
        self.buckets[0].is_empty() || self.buckets[1].is_empty()
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(self.buckets[1].iter().copied())
    }

    pub fn flip(&mut self, v: usize) {
        let from = self.mutant[v] as usize;
        let p = self.pos[v];
        self.buckets[from].swap_remove(p);
        if let Some(&moved) = self.buckets[from].get(p) {
            self.pos[moved] = p;
        }
        self.pos[v] = self.buckets[1 - from].len();
        self.buckets[1 - from].push(v);
        self.mutant[v] = !self.mutant[v];
    }

    /// Vertex drawn with weight `a` per mutant and 1 per resident.
    fn draw_weighted<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> usize {
        let m = self.buckets[1].len() as f64;
        let rest = self.buckets[0].len() as f64;
        let b = (rng.random::<f64>() * (a * m + rest) < a * m) as usize;
        let bucket = if self.buckets[b].is_empty() {
            &self.buckets[1 - b]
        } else {
            &self.buckets[b]
        };
        bucket[rng.random_range(0..bucket.len())]
    }
}

/// Precomputed sampling tables for one graph, rule and fitness.
#[derive(Debug, Clone)]
pub struct Simulator<'g> {
    graph: &'g EvolutionaryGraph,
    rule: BiasedRule,
    r: f64,
    out_tables: Vec<Option<WeightedIndex<f64>>>,
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g EvolutionaryGraph, rule: BiasedRule, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fitness must be positive, got {r}"
            )));
        }
        rule.family().check(graph)?;
        let out_tables = if rule == BiasedRule::BdB {
            (0..graph.n())
                .map(|i| WeightedIndex::new(graph.outgoing(i).iter().map(|&(_, w)| w)).ok())
                .collect()
        } else {
            Vec::new()
        };
        Ok(Simulator {
            graph,
            rule,
            r,
            out_tables,
        })
    }

    fn fit(&self, pop: &Population, v: usize) -> f64 {
        if pop.is_mutant(v) {
            self.r
        } else {
            1.0
        }
    }

    /// Draws one reproduction event `(parent, replaced)`. `None` when the
    /// drawn vertex has no neighbor to act on.
    pub fn draw<R: Rng + ?Sized>(&self, pop: &Population, rng: &mut R) -> Option<(usize, usize)> {
        let g = self.graph;
        let n = g.n();
        match self.rule {
            BiasedRule::BdB => {
                let i = pop.draw_weighted(self.r, rng);
                let table = self.out_tables[i].as_ref()?;
                Some((i, g.outgoing(i)[table.sample(rng)].0))
            }
            BiasedRule::BdD => {
                let i = rng.random_range(0..n);
                let out = g.outgoing(i);
                let total: f64 = out.iter().map(|&(j, w)| w / self.fit(pop, j)).sum();
                let j = scan(
                    out.iter().map(|&(j, w)| (j, w / self.fit(pop, j))),
                    total,
                    rng,
                )?;
                Some((i, j))
            }
            BiasedRule::DbB => {
                let j = rng.random_range(0..n);
                let inc = g.incoming(j);
                let total: f64 = inc.iter().map(|&(i, _)| self.fit(pop, i)).sum();
                let i = scan(inc.iter().map(|&(i, _)| (i, self.fit(pop, i))), total, rng)?;
                Some((i, j))
            }
            BiasedRule::DbD => {
                let j = pop.draw_weighted(1.0 / self.r, rng);
                let inc = g.incoming(j);
                if inc.is_empty() {
                    return None;
                }
                Some((inc[rng.random_range(0..inc.len())].0, j))
            }
            BiasedRule::Ld => {
                // Rejection against the larger of the two fitness values.
                let edges = g.edges();
                let top = self.r.max(1.0);
                loop {
                    let e = &edges[rng.random_range(0..edges.len())];
                    if rng.random::<f64>() * top < self.fit(pop, e.source) {
                        return Some((e.source, e.target));
                    }
                }
            }
        }
    }

    /// One update event. Returns the vertex that changed type, if any.
    pub fn event<R: Rng + ?Sized>(&self, pop: &mut Population, rng: &mut R) -> Option<usize> {
        let (i, j) = self.draw(pop, rng)?;
        if pop.is_mutant(i) != pop.is_mutant(j) {
            pop.flip(j);
            Some(j)
        } else {
            None
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        config: &Configuration,
        step_cap: u64,
        rng: &mut R,
    ) -> Result<RunOutcome> {
        let mut pop = Population::new(self.graph.n(), config);
        let mut steps = 0;
        while !pop.is_absorbed() {
            if steps >= step_cap {
                return Err(Error::StepCapExceeded { cap: step_cap });
            }
            self.event(&mut pop, rng);
            steps += 1;
        }
        Ok(RunOutcome {
            fixated: pop.mutants() > 0,
            steps,
        })
    }
}

fn scan<R: Rng + ?Sized>(
    items: impl Iterator<Item = (usize, f64)>,
    total: f64,
    rng: &mut R,
) -> Option<usize> {
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (v, w) in items {
        if u < w {
            return Some(v);
        }
        u -= w;
        last = Some(v);
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub fixated: bool,
    /// Update events until absorption, including those that changed nothing.
    pub steps: u64,
}

fn check_inputs(graph: &EvolutionaryGraph, config: &Configuration) -> Result<()> {
    graph.check_configuration(config)?;
    if !graph.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    Ok(())
}

pub fn simulate_run(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    r: f64,
    seed: u64,
) -> Result<RunOutcome> {
    check_inputs(graph, config)?;
    let sim = Simulator::new(graph, rule, r)?;
    sim.run(config, default_step_cap(graph.n()), &mut rng_for(seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rule: BiasedRule,
    pub r: f64,
    pub runs: u64,
    pub fixations: u64,
    pub fixation_frequency: f64,
    pub std_error: f64,
    /// Mean events to absorption over runs that fixated.
    pub mean_fixation_time: Option<f64>,
    pub fixation_time_std_error: Option<f64>,
    pub mean_extinction_time: Option<f64>,
    pub mean_absorption_time: Option<f64>,
    /// Runs that hit the step cap; excluded from every average.
    pub capped_runs: u64,
    pub wall_time: f64,
    pub seed: u64,
}

/// `sqrt(f (1 - f) / (R - 1))`.
pub fn std_error(frequency: f64, runs: u64) -> f64 {
    if runs < 2 {
        return f64::NAN;
    }
    (frequency * (1.0 - frequency) / (runs - 1) as f64).sqrt()
}

fn mean_and_se(times: &[f64]) -> (Option<f64>, Option<f64>) {
    if times.is_empty() {
        return (None, None);
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    if times.len() < 2 {
        return (Some(mean), None);
    }
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

pub fn estimate(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    r: f64,
    runs: u64,
    seed: u64,
) -> Result<SimulationSummary> {
    estimate_with_cap(
        graph,
        config,
        rule,
        r,
        runs,
        seed,
        default_step_cap(graph.n()),
    )
}

pub fn estimate_with_cap(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    r: f64,
    runs: u64,
    seed: u64,
    step_cap: u64,
) -> Result<SimulationSummary> {
    if runs < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 runs, got {runs}"
        )));
    }
    check_inputs(graph, config)?;
    let sim = Simulator::new(graph, rule, r)?;
    let start = Instant::now();
    let outcomes: Vec<Result<RunOutcome>> = (0..runs)
        .into_par_iter()
        .map(|k| sim.run(config, step_cap, &mut rng_for(seed, k)))
        .collect();
    let wall_time = start.elapsed().as_secs_f64();

    // Sequential aggregation in run order keeps the sums bit-identical.
    let mut fix_times = Vec::new();
    let mut ext_times = Vec::new();
    let mut capped = 0;
    for o in &outcomes {
        match o {
            Ok(RunOutcome {
                fixated: true,
                steps,
            }) => fix_times.push(*steps as f64),
            Ok(RunOutcome {
                fixated: false,
                steps,
            }) => ext_times.push(*steps as f64),
            Err(Error::StepCapExceeded { .. }) => capped += 1,
            Err(_) => unreachable!("runs only fail on the step cap"),
        }
    }
    let fixations = fix_times.len() as u64;
    let frequency = fixations as f64 / runs as f64;
    let (mean_fix, fix_se) = mean_and_se(&fix_times);
    let (mean_ext, _) = mean_and_se(&ext_times);
    let all: Vec<f64> = fix_times.iter().chain(&ext_times).copied().collect();
    let (mean_abs, _) = mean_and_se(&all);

    Ok(SimulationSummary {
        rule,
        r,
        runs,
        fixations,
        fixation_frequency: frequency,
        std_error: std_error(frequency, runs),
        mean_fixation_time: mean_fix,
        fixation_time_std_error: fix_se,
        mean_extinction_time: mean_ext,
        mean_absorption_time: mean_abs,
        capped_runs: capped,
        wall_time,
        seed,
    })
}

/// Empirical one-step transition counts from `config`: `(state, count)`
/// pairs sorted by state, states encoded as in [`Configuration::to_bits`].
pub fn transition_counts(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    r: f64,
    events: u64,
    seed: u64,
) -> Result<Vec<(u64, u64)>> {
    graph.check_configuration(config)?;
    let sim = Simulator::new(graph, rule, r)?;
    let pop = Population::new(graph.n(), config);
    let from = config.to_bits();
    let mut rng = rng_for(seed, 0);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..events {
        let to = match sim.draw(&pop, &mut rng) {
            Some((i, j)) if pop.is_mutant(i) != pop.is_mutant(j) => from ^ (1 << j),
            _ => from,
        };
        *counts.entry(to).or_insert(0) += 1;
    }
    Ok(counts.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredRuns {
    pub runs: u64,
    /// `S` was 0 or 1, where the binomial variance vanishes.
    pub degenerate: bool,
}

/// Runs needed for a standard error of about `epsilon` when the fixation
/// probability is `s`: `ceil(s (1 - s) / epsilon^2) + 1`.
pub fn required_runs(s: f64, epsilon: f64) -> Result<RequiredRuns> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!(
            "fixation estimate must lie in [0, 1], got {s}"
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(RequiredRuns {
            runs: 2,
            degenerate: true,
        });
    }
    let x = s * (1.0 - s) / (epsilon * epsilon);
    // Absorb representation error so exact quotients like 0.25/1e-4 stay put.
    let runs = (x * (1.0 - 4.0 * f64::EPSILON)).ceil() as u64 + 1;
    Ok(RequiredRuns {
        runs: runs.max(2),
        degenerate: false,
    })
}

/// How close the solver has to get before its clock stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum EpsilonPolicy {
    /// Until the running mean is within one Monte Carlo standard error of
    /// the Monte Carlo estimate.
    #[default]
    WithinStdError,
    /// Until the standard deviation of the vector is at most this value.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub n: usize,
    pub rule: NeutralRule,
    pub r: f64,
    pub mc_time: f64,
    pub solver_time: f64,
    pub speedup: f64,
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub solver_estimate: f64,
    pub solver_iterations: u64,
    /// The solver estimate ended within one standard error of the ensemble.
    pub reached_band: bool,
}

/// Wall-clock comparison of a Monte Carlo ensemble against the iteration
/// with the stdev criterion. Only neutral drift (`r = 1`) is compared,
/// since that is what the iteration computes.
pub fn speedup_benchmark(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: NeutralRule,
    mc_runs: u64,
    seed: u64,
    policy: EpsilonPolicy,
) -> Result<Benchmark> {
    let mc = estimate(graph, config, rule.as_biased(), 1.0, mc_runs, seed)?;

    let start = Instant::now();
    let mut reached_band = false;
    let (solver_estimate, iterations) = match policy {
        EpsilonPolicy::WithinStdError => {
            // A degenerate ensemble has zero spread; fall back to 1/R.
            let band = if mc.std_error > 0.0 {
                mc.std_error
            } else {
                1.0 / mc_runs as f64
            };
            // About a third of ensembles miss the true value by more than one
            // standard error, and then the mean may never enter the band. Stop
            // anyway once the iteration is as precise as the ensemble.
            let mut prop = Propagator::new(graph, config, rule)?;
            let mut s = prop.summary();
            loop {
                if (s.avg - mc.fixation_frequency).abs() <= band {
                    reached_band = true;
                    break;
                }
                if s.stdev <= band {
                    break;
                }
                if prop.t() >= DEFAULT_MAX_ITERS {
                    return Err(Error::NotConverged {
                        iterations: prop.t() as usize,
                    });
                }
                prop.step();
                s = prop.summary();
            }
            (s.avg, prop.t())
        }
        EpsilonPolicy::Fixed(eps) => {
            let rep = solve(
                graph,
                config,
                &SolveOptions::new(rule, eps).criterion(Criterion::Stdev),
            )?;
            if !rep.converged {
                return Err(Error::NotConverged {
                    iterations: rep.iterations as usize,
                });
            }
            reached_band = (rep.fixation - mc.fixation_frequency).abs() <= mc.std_error;
            (rep.fixation, rep.iterations)
        }
    };
    let solver_time = start.elapsed().as_secs_f64();

    Ok(Benchmark {
        n: graph.n(),
        rule,
        r: 1.0,
        mc_time: mc.wall_time,
        solver_time,
        speedup: mc.wall_time / solver_time.max(1e-9),
        mc_estimate: mc.fixation_frequency,
        mc_std_error: mc.std_error,
        solver_estimate,
        solver_iterations: iterations,
        reached_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::oracle::build_chain;

    fn two_cycle() -> EvolutionaryGraph {
        EvolutionaryGraph::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)]).unwrap()
    }

    fn three_cycle() -> EvolutionaryGraph {
        EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn population_flips() {
        let mut pop = Population::new(5, &Configuration::new([1, 3]));
        assert_eq!(pop.mutants(), 2);
        pop.flip(1);
        pop.flip(4);
        assert_eq!(pop.configuration(), Configuration::new([3, 4]));
        pop.flip(3);
        pop.flip(4);
        assert!(pop.is_absorbed());
        assert_eq!(pop.mutants(), 0);
    }

    #[test]
    fn two_cycle_absorbs_in_one_step() {
        for seed in 0..20 {
            for rule in BiasedRule::ALL {
                let out = simulate_run(&two_cycle(), &Configuration::singleton(0), rule, 1.0, seed)
                    .unwrap();
                assert_eq!(out.steps, 1);
            }
        }
    }

    #[test]
    fn trivial_configurations() {
        let g = three_cycle();
        let out = simulate_run(&g, &Configuration::all(3), BiasedRule::BdB, 1.0, 1).unwrap();
        assert_eq!(
            out,
            RunOutcome {
                fixated: true,
                steps: 0
            }
        );
        let out = simulate_run(&g, &Configuration::empty(), BiasedRule::BdB, 1.0, 1).unwrap();
        assert_eq!(
            out,
            RunOutcome {
                fixated: false,
                steps: 0
            }
        );
    }

    #[test]
    fn standard_error_examples() {
        assert!((std_error(0.5, 2001) - 0.011_180_339_887_498_949).abs() < 1e-15);
        assert_eq!(std_error(0.0, 10), 0.0);
    }

    #[test]
    fn required_runs_examples() {
        assert_eq!(required_runs(0.5, 0.01).unwrap().runs, 2501);
        assert_eq!(required_runs(0.5, 0.5).unwrap().runs, 2);
        assert_eq!(required_runs(0.1, 0.01).unwrap().runs, 901);
        let d = required_runs(1.0, 0.01).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.runs, 2);
        assert!(required_runs(0.5, 0.0).is_err());
        assert!(required_runs(1.5, 0.1).is_err());
    }

    #[test]
    fn two_cycle_frequency() {
        let s = estimate(
            &two_cycle(),
            &Configuration::singleton(0),
            BiasedRule::BdB,
            1.0,
            10_000,
            7,
        )
        .unwrap();
        assert!((s.std_error - 0.005).abs() < 2e-4);
        assert!((s.fixation_frequency - 0.5).abs() <= 3.0 * s.std_error);
        assert_eq!(s.mean_fixation_time, Some(1.0));
        assert_eq!(s.capped_runs, 0);
    }

    #[test]
    fn three_cycle_frequency_and_time() {
        let g = three_cycle();
        let c = Configuration::singleton(0);
        let s = estimate(&g, &c, BiasedRule::BdB, 1.0, 10_000, 11).unwrap();
        assert!((s.fixation_frequency - 1.0 / 3.0).abs() <= 3.0 * s.std_error);
        let exact = build_chain(&g, BiasedRule::BdB, 1.0)
            .unwrap()
            .solve()
            .unwrap()
            .mean_times(&c)
            .unwrap();
        let t = s.mean_fixation_time.unwrap();
        assert!((t - exact.fixation.unwrap()).abs() <= 3.0 * s.fixation_time_std_error.unwrap());
    }

    #[test]
    fn deterministic_apart_from_wall_time() {
        let g = three_cycle();
        let c = Configuration::singleton(1);
        let mut a = estimate(&g, &c, BiasedRule::DbD, 1.5, 500, 3).unwrap();
        let mut b = estimate(&g, &c, BiasedRule::DbD, 1.5, 500, 3).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn step_cap_is_reported() {
        let g =
            EvolutionaryGraph::undirected(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let s = estimate_with_cap(
            &g,
            &Configuration::new([0, 1, 2]),
            BiasedRule::BdB,
            1.0,
            50,
            1,
            1,
        )
        .unwrap();
        assert_eq!(s.capped_runs, 50);
        assert_eq!(s.mean_absorption_time, None);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = EvolutionaryGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            simulate_run(&g, &Configuration::singleton(0), BiasedRule::BdB, 1.0, 0),
            Err(Error::NotStronglyConnected)
        ));
        assert!(simulate_run(
            &three_cycle(),
            &Configuration::singleton(0),
            BiasedRule::BdB,
            0.0,
            0
        )
        .is_err());
        assert!(estimate(
            &three_cycle(),
            &Configuration::singleton(0),
            BiasedRule::BdB,
            1.0,
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn small_graph_benchmark_is_consistent() {
        let g =
            EvolutionaryGraph::undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let b = speedup_benchmark(
            &g,
            &Configuration::singleton(0),
            NeutralRule::Bd,
            2000,
            5,
            EpsilonPolicy::default(),
        )
        .unwrap();
        assert!(b.speedup > 0.0);
        assert!(b.reached_band);
        assert!((b.mc_estimate - b.solver_estimate).abs() <= b.mc_std_error);
    }
}
