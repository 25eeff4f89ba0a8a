//! Bounds on the fixation probability of an advantageous mutant (`r > 1`).
//!
//! The neutral-drift fixation probability is a lower bound for every biased
//! rule. For a single mutant at `i` there are closed-form upper bounds:
//!
//! | rule | bound on `F_{i}` |
//! |------|------------------|
//! | BD-B | `r / (r + sum_j w_ji)` |
//! | BD-D | `1 / sum_j (w_ji / (r - r w_ji + w_ji))` |
//! | DB-B | `sum_j r w_ij / (1 - w_ij + r w_ij)` |
//! | DB-D | `r * sum_j w_ij` |
//!
//! BD sums run over in-neighbors of `i`, DB sums over out-neighbors. Raw
//! values above one are vacuous; they are clamped and flagged. No formula is
//! known for LD.

use serde::{Deserialize, Serialize};

use crate::dynamics::BiasedRule;
use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};
use crate::solver::{solve, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    /// Formula value before clamping; may be infinite.
    pub raw: f64,
    pub vacuous: bool,
}

/// Neutral fixation probability under the rule's family, a lower bound on
/// the biased fixation probability for any `r >= 1`.
pub fn lower_bound(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    epsilon: f64,
) -> Result<f64> {
    let report = solve(graph, config, &SolveOptions::new(rule.family(), epsilon))?;
    Ok(report.fixation)
}

pub fn upper_bound_single(
    graph: &EvolutionaryGraph,
    i: usize,
    r: f64,
    rule: BiasedRule,
) -> Result<UpperBound> {
    if i >= graph.n() {
        return Err(Error::VertexOutOfRange {
            vertex: i,
            n: graph.n(),
        });
    }
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bounds need r >= 1, got {r}"
        )));
    }
    let raw = match rule {
        BiasedRule::BdB => r / (r + graph.temperature(i)),
        BiasedRule::BdD => {
            let s: f64 = graph
                .incoming(i)
                .iter()
                .map(|&(_, w)| w / (r - r * w + w))
                .sum();
            1.0 / s
        }
        BiasedRule::DbB => graph
            .outgoing(i)
            .iter()
            .map(|&(_, w)| r * w / (1.0 - w + r * w))
            .sum(),
        BiasedRule::DbD => r * graph.outgoing(i).iter().map(|&(_, w)| w).sum::<f64>(),
        BiasedRule::Ld => return Err(Error::NoBoundFormula("ld")),
    };
    Ok(UpperBound {
        value: raw.clamp(0.0, 1.0),
        raw,
        vacuous: raw.is_nan() || raw >= 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub vertex: usize,
    pub r: f64,
    pub rule: BiasedRule,
    pub lower: f64,
    pub upper: f64,
    pub raw_upper: f64,
    pub vacuous: bool,
    /// False for LD, where `upper` is the trivial 1.
    pub has_formula: bool,
}

pub fn bound_report(
    graph: &EvolutionaryGraph,
    i: usize,
    r: f64,
    rule: BiasedRule,
    epsilon: f64,
) -> Result<BoundReport> {
    let lower = lower_bound(graph, &Configuration::singleton(i), rule, epsilon)?;
    let (upper, has_formula) = match upper_bound_single(graph, i, r, rule) {
        Ok(b) => (b, true),
        Err(Error::NoBoundFormula(_)) => (
            UpperBound {
                value: 1.0,
                raw: 1.0,
                vacuous: true,
            },
            false,
        ),
        Err(e) => return Err(e),
    };
    // The neutral estimate is within epsilon of the true value.
    debug_assert!(
        lower <= upper.value + epsilon,
        "lower {lower} > upper {}",
        upper.value
    );
    Ok(BoundReport {
        vertex: i,
        r,
        rule,
        lower,
        upper: upper.value,
        raw_upper: upper.raw,
        vacuous: upper.vacuous,
        has_formula,
    })
}
