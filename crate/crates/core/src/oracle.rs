//! Exact absorbing Markov chain over all `2^N` mutant configurations.
//!
//! State `s` encodes the configuration with bit `i` set iff vertex `i` is a
//! mutant (little-endian by vertex id), so state `0` is extinction and
//! `2^N - 1` is fixation. Every update event changes at most one vertex, so
//! each row holds a self-loop plus at most `N` single-bit flips.
//!
//! This is a reference implementation for small graphs. It does not scale
//! and is not meant to.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::BiasedRule;
use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};

/// Largest population for which a chain is built.
pub const DEFAULT_CHAIN_CAP: usize = 16;

/// Up to this many transient states the system is solved densely.
const DENSE_LIMIT: usize = 2048;

const GS_TOLERANCE: f64 = 1e-15;
const GS_MAX_SWEEPS: usize = 2_000_000;
const PIVOT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub stay: f64,
    /// `(vertex, probability)`: the event flips `vertex` to the other type.
    pub flips: Vec<(usize, f64)>,
}

impl ChainRow {
    pub fn is_absorbing(&self) -> bool {
        self.flips.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.stay + self.flips.iter().map(|&(_, p)| p).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct ChainModel {
    n: usize,
    rule: BiasedRule,
    r: f64,
    rows: Vec<ChainRow>,
}

pub fn build_chain(graph: &EvolutionaryGraph, rule: BiasedRule, r: f64) -> Result<ChainModel> {
    build_chain_with_cap(graph, rule, r, DEFAULT_CHAIN_CAP)
}

pub fn build_chain_with_cap(
    graph: &EvolutionaryGraph,
    rule: BiasedRule,
    r: f64,
    cap: usize,
) -> Result<ChainModel> {
    let n = graph.n();
    if n > cap || n > 63 {
        return Err(Error::ChainTooLarge { n, cap });
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fitness r must be positive, got {r}"
        )));
    }
    let rows = (0..1u64 << n)
        .into_par_iter()
        .map(|s| row_for(graph, rule, r, s))
        .collect();
    Ok(ChainModel { n, rule, r, rows })
}

/// Transition row of state `s`. Event probabilities follow the model: which
/// vertex reproduces (or dies, or which edge fires) and which neighbor it
/// acts on, with mutants carrying fitness `r` and residents fitness 1.
#[allow(clippy::needless_range_loop)]
fn row_for(graph: &EvolutionaryGraph, rule: BiasedRule, r: f64, s: u64) -> ChainRow {
    let n = graph.n();
    let nf = n as f64;
    let is_mut = |v: usize| s >> v & 1 == 1;
    let fit = |v: usize| if is_mut(v) { r } else { 1.0 };
    let mut flip = vec![0.0; n];
    let mut stay = 0.0;

    match rule {
        BiasedRule::BdB => {
            let m = s.count_ones() as f64;
            let total = r * m + (nf - m);
            for i in 0..n {
                let pick = fit(i) / total;
                if graph.out_degree(i) == 0 {
                    stay += pick;
                }
                for &(j, w) in graph.outgoing(i) {
                    if is_mut(i) != is_mut(j) {
                        flip[j] += pick * w;
                    } else {
                        stay += pick * w;
                    }
                }
            }
        }
        BiasedRule::BdD => {
            for i in 0..n {
                let out = graph.outgoing(i);
                if out.is_empty() {
                    stay += 1.0 / nf;
                    continue;
                }
                let denom: f64 = out.iter().map(|&(j, w)| w / fit(j)).sum();
                for &(j, w) in out {
                    let p = (w / fit(j)) / denom / nf;
                    if is_mut(i) != is_mut(j) {
                        flip[j] += p;
                    } else {
                        stay += p;
                    }
                }
            }
        }
        BiasedRule::DbB => {
            for j in 0..n {
                let inc = graph.incoming(j);
                if inc.is_empty() {
                    stay += 1.0 / nf;
                    continue;
                }
                let denom: f64 = inc.iter().map(|&(i, _)| fit(i)).sum();
                for &(i, _) in inc {
                    let p = fit(i) / denom / nf;
                    if is_mut(i) != is_mut(j) {
                        flip[j] += p;
                    } else {
                        stay += p;
                    }
                }
            }
        }
        BiasedRule::DbD => {
            let total: f64 = (0..n).map(|v| 1.0 / fit(v)).sum();
            for j in 0..n {
                let die = (1.0 / fit(j)) / total;
                let inc = graph.incoming(j);
                if inc.is_empty() {
                    stay += die;
                    continue;
                }
                let k = inc.len() as f64;
                for &(i, _) in inc {
                    if is_mut(i) != is_mut(j) {
                        flip[j] += die / k;
                    } else {
                        stay += die / k;
                    }
                }
            }
        }
        BiasedRule::Ld => {
            let total: f64 = graph.edges().iter().map(|e| fit(e.source)).sum();
            if total == 0.0 {
                stay = 1.0;
            }
            for e in graph.edges() {
                let p = fit(e.source) / total;
                if is_mut(e.source) != is_mut(e.target) {
                    flip[e.target] += p;
                } else {
                    stay += p;
                }
            }
        }
    }

    ChainRow {
        stay,
        flips: flip
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .collect(),
    }
}

impl ChainModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> BiasedRule {
        self.rule
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn full_state(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    pub fn row(&self, state: u64) -> &ChainRow {
        &self.rows[state as usize]
    }

    /// `(destination, probability)` pairs including the self-loop.
    pub fn transitions(&self, state: u64) -> Vec<(u64, f64)> {
        let row = self.row(state);
        let mut out = vec![(state, row.stay)];
        out.extend(row.flips.iter().map(|&(v, p)| (state ^ (1u64 << v), p)));
        out
    }

    pub fn absorbing_states(&self) -> Vec<u64> {
        (0..self.rows.len() as u64)
            .filter(|&s| self.row(s).is_absorbing())
            .collect()
    }

    /// Largest deviation of any row total from 1.
    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.total() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn state_of(&self, config: &Configuration) -> Result<u64> {
        match config.iter().find(|&v| v >= self.n) {
            Some(vertex) => Err(Error::VertexOutOfRange { vertex, n: self.n }),
            None => Ok(config.to_bits()),
        }
    }

    /// Absorption probabilities and conditional mean times for every state.
    pub fn solve(&self) -> Result<ChainSolution> {
        let full = self.full_state();
        let transient: Vec<u64> = (0..self.rows.len() as u64)
            .filter(|&s| !self.row(s).is_absorbing())
            .collect();
        let mut index = vec![usize::MAX; self.rows.len()];
        for (k, &s) in transient.iter().enumerate() {
            index[s as usize] = k;
        }

        let system = TransientSystem {
            chain: self,
            transient: &transient,
            index: &index,
        };
        let into_state = |target: u64| -> Vec<f64> {
            transient
                .iter()
                .map(|&s| {
                    self.row(s)
                        .flips
                        .iter()
                        .filter(|&&(v, _)| s ^ (1u64 << v) == target)
                        .map(|&(_, p)| p)
                        .sum()
                })
                .collect()
        };
        let b_fix = if self.row(full).is_absorbing() {
            into_state(full)
        } else {
            vec![0.0; transient.len()]
        };
        let b_ext = if self.row(0).is_absorbing() {
            into_state(0)
        } else {
            vec![0.0; transient.len()]
        };

        let solver = system.factor()?;
        let h_fix = solver.solve(&system, &b_fix)?;
        let h_ext = solver.solve(&system, &b_ext)?;
        let g_fix = solver.solve(&system, &h_fix)?;
        let g_ext = solver.solve(&system, &h_ext)?;
        let absorb = solver.solve(&system, &vec![1.0; transient.len()])?;

        let states = self.rows.len();
        let mut sol = ChainSolution {
            fixation: vec![0.0; states],
            extinction: vec![0.0; states],
            weighted_fixation_time: vec![0.0; states],
            weighted_extinction_time: vec![0.0; states],
            absorption_time: vec![0.0; states],
            n: self.n,
        };
        for s in 0..states as u64 {
            let k = index[s as usize];
            if k == usize::MAX {
                sol.fixation[s as usize] = if s == full { 1.0 } else { 0.0 };
                sol.extinction[s as usize] = if s == 0 { 1.0 } else { 0.0 };
            } else {
                sol.fixation[s as usize] = h_fix[k];
                sol.extinction[s as usize] = h_ext[k];
                sol.weighted_fixation_time[s as usize] = g_fix[k];
                sol.weighted_extinction_time[s as usize] = g_ext[k];
                sol.absorption_time[s as usize] = absorb[k];
            }
        }
        Ok(sol)
    }
}

struct TransientSystem<'a> {
    chain: &'a ChainModel,
    transient: &'a [u64],
    index: &'a [usize],
}

enum Factorization {
    Dense {
        lu: Vec<f64>,
        perm: Vec<usize>,
        size: usize,
    },
    Iterative,
}

impl TransientSystem<'_> {
    /// Assembles `I - Q` over transient states and LU-factors it when small.
    fn factor(&self) -> Result<Factorization> {
        let size = self.transient.len();
        if size > DENSE_LIMIT {
            return Ok(Factorization::Iterative);
        }
        let mut a = vec![0.0; size * size];
        for (k, &s) in self.transient.iter().enumerate() {
            let row = self.chain.row(s);
            a[k * size + k] += 1.0 - row.stay;
            for &(v, p) in &row.flips {
                let dest = self.index[(s ^ (1u64 << v)) as usize];
                if dest != usize::MAX {
                    a[k * size + dest] -= p;
                }
            }
        }
        let mut perm: Vec<usize> = (0..size).collect();
        for col in 0..size {
            let pivot = (col..size)
                .max_by(|&x, &y| a[x * size + col].abs().total_cmp(&a[y * size + col].abs()))
                .unwrap();
            if a[pivot * size + col].abs() < PIVOT_FLOOR {
                return Err(Error::SingularSystem);
            }
            if pivot != col {
                for c in 0..size {
                    a.swap(pivot * size + c, col * size + c);
                }
                perm.swap(pivot, col);
            }
            let d = a[col * size + col];
            for row in (col + 1)..size {
                let factor = a[row * size + col] / d;
                if factor == 0.0 {
                    continue;
                }
                a[row * size + col] = factor;
                for c in (col + 1)..size {
                    a[row * size + c] -= factor * a[col * size + c];
                }
            }
        }
        Ok(Factorization::Dense { lu: a, perm, size })
    }
}

impl Factorization {
    fn solve(&self, system: &TransientSystem<'_>, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factorization::Dense { lu, perm, size } => {
                let size = *size;
                let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
                for i in 0..size {
                    let mut acc = x[i];
                    for k in 0..i {
                        acc -= lu[i * size + k] * x[k];
                    }
                    x[i] = acc;
                }
                for i in (0..size).rev() {
                    let mut acc = x[i];
                    for k in (i + 1)..size {
                        acc -= lu[i * size + k] * x[k];
                    }
                    x[i] = acc / lu[i * size + i];
                }
                Ok(x)
            }
            Factorization::Iterative => gauss_seidel(system, b),
        }
    }
}

fn gauss_seidel(system: &TransientSystem<'_>, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = vec![0.0; b.len()];
    for _ in 0..GS_MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for (k, &s) in system.transient.iter().enumerate() {
            let row = system.chain.row(s);
            let mut acc = b[k];
            for &(v, p) in &row.flips {
                let dest = system.index[(s ^ (1u64 << v)) as usize];
                if dest != usize::MAX {
                    acc += p * x[dest];
                }
            }
            let next = acc / (1.0 - row.stay);
            delta = delta.max((next - x[k]).abs() / next.abs().max(1.0));
            x[k] = next;
        }
        if delta <= GS_TOLERANCE {
            return Ok(x);
        }
        if !delta.is_finite() {
            return Err(Error::SingularSystem);
        }
    }
    Err(Error::NotConverged {
        iterations: GS_MAX_SWEEPS,
    })
}

/// Per-state absorption quantities of a solved chain.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    n: usize,
    fixation: Vec<f64>,
    extinction: Vec<f64>,
    /// `E[T * 1{fixation}]`.
    weighted_fixation_time: Vec<f64>,
    weighted_extinction_time: Vec<f64>,
    absorption_time: Vec<f64>,
}

/// Conditional mean numbers of update events. `None` where the conditioning
/// event has probability zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanTimes {
    pub fixation: Option<f64>,
    pub extinction: Option<f64>,
    pub absorption: f64,
}

impl ChainSolution {
    fn state(&self, config: &Configuration) -> Result<usize> {
        match config.iter().find(|&v| v >= self.n) {
            Some(vertex) => Err(Error::VertexOutOfRange { vertex, n: self.n }),
            None => Ok(config.to_bits() as usize),
        }
    }

    pub fn fixation(&self, config: &Configuration) -> Result<f64> {
        Ok(self.fixation[self.state(config)?])
    }

    pub fn extinction(&self, config: &Configuration) -> Result<f64> {
        Ok(self.extinction[self.state(config)?])
    }

    pub fn fixation_of_state(&self, state: u64) -> f64 {
        self.fixation[state as usize]
    }

    pub fn mean_times(&self, config: &Configuration) -> Result<MeanTimes> {
        let s = self.state(config)?;
        let conditional = |weighted: f64, prob: f64| (prob > 0.0).then(|| weighted / prob);
        Ok(MeanTimes {
            fixation: conditional(self.weighted_fixation_time[s], self.fixation[s]),
            extinction: conditional(self.weighted_extinction_time[s], self.extinction[s]),
            absorption: self.absorption_time[s],
        })
    }
}

/// Probability that `config` reaches the all-mutant state.
pub fn fixation_exact(chain: &ChainModel, config: &Configuration) -> Result<f64> {
    chain.state_of(config)?;
    chain.solve()?.fixation(config)
}

pub fn mean_times_exact(chain: &ChainModel, config: &Configuration) -> Result<MeanTimes> {
    chain.state_of(config)?;
    chain.solve()?.mean_times(config)
}
