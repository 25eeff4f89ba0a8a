//! Mean time to fixation.
//!
//! The probability of having fixated by step `t` never exceeds the smallest
//! vertex probability at `t`, so pushing all of the fixation mass as late as
//! the min-trace allows gives a lower bound on the conditional mean time:
//!
//! ```text
//! t_C >= (1 / F_C) * sum_t t * (Pmin_t - Pmin_{t-1})
//! ```
//!
//! The sum is accumulated while iterating the neutral kernel until the
//! vertex probabilities have a standard deviation below `stop_stdev`, and is
//! normalized by the mean vertex probability at that point. Truncating the
//! sum early only drops nonnegative BD terms, so the result stays a bound.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BiasedRule, NeutralRule, Propagator, Summary};
use crate::error::{Error, Result};
use crate::graph::{Configuration, EvolutionaryGraph};
use crate::oracle::{build_chain, MeanTimes};

pub const DEFAULT_STOP_STDEV: f64 = 2.5e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MttfOptions {
    pub rule: NeutralRule,
    pub stop_stdev: f64,
    pub max_iters: u64,
    pub record_trace: bool,
}

impl Default for MttfOptions {
    fn default() -> Self {
        MttfOptions {
            rule: NeutralRule::Bd,
            stop_stdev: DEFAULT_STOP_STDEV,
            max_iters: crate::solver::DEFAULT_MAX_ITERS,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MttfRow {
    pub t: u64,
    pub p_min: f64,
    pub increment: f64,
    pub running_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MttfReport {
    pub lower_bound: f64,
    /// `sum_t t * (Pmin_t - Pmin_{t-1})` at termination.
    pub partial_sum: f64,
    /// Mean vertex probability at termination, the fixation estimate.
    pub normalizer: f64,
    pub iterations: u64,
    pub truncated: bool,
    /// Steps where the min-trace decreased. Always zero under BD.
    pub negative_increments: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<MttfRow>>,
}

pub fn mttf_lower_bound(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    options: &MttfOptions,
) -> Result<MttfReport> {
    graph.check_configuration(config)?;
    if !graph.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let mut prop = Propagator::new(graph, config, options.rule)?;
    let mut summary = prop.summary();
    let mut sum = 0.0;
    let mut negative = 0;
    let mut trace = options.record_trace.then(|| {
        vec![MttfRow {
            t: 0,
            p_min: summary.min,
            increment: 0.0,
            running_sum: 0.0,
        }]
    });

    while summary.stdev > options.stop_stdev && prop.t() < options.max_iters {
        let prev_min = summary.min;
        prop.step();
        summary = Summary::of(prop.values());
        let increment = prop.t() as f64 * (summary.min - prev_min);
        if increment < 0.0 {
            negative += 1;
        }
        sum += increment;
        if let Some(rows) = trace.as_mut() {
            rows.push(MttfRow {
                t: prop.t(),
                p_min: summary.min,
                increment,
                running_sum: sum,
            });
        }
    }

    let normalizer = summary.avg;
    if normalizer <= 0.0 {
        return Err(Error::ZeroFixation);
    }
    Ok(MttfReport {
        lower_bound: sum / normalizer,
        partial_sum: sum,
        normalizer,
        iterations: prop.t(),
        truncated: summary.stdev > options.stop_stdev,
        negative_increments: negative,
        trace,
    })
}

/// Exact conditional mean times from the absorbing chain; small `N` only.
pub fn mttf_exact(
    graph: &EvolutionaryGraph,
    config: &Configuration,
    rule: BiasedRule,
    r: f64,
) -> Result<MeanTimes> {
    let chain = build_chain(graph, rule, r)?;
    chain.solve()?.mean_times(config)
}
