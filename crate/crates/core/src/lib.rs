//! Fixation probabilities on evolutionary graphs without simulation.
//!
//! The probability that each vertex holds a mutant is propagated one update
//! at a time. Under neutral drift the smallest and largest of these bracket
//! the fixation probability and close in on it, which gives a deterministic
//! estimate with a known error.
//!
//! ```
//! use fixlab::{solve, Configuration, EvolutionaryGraph, NeutralRule, SolveOptions};
//!
//! let path = EvolutionaryGraph::undirected(3, &[(0, 1), (1, 2)])?;
//! let report = solve(&path, &Configuration::singleton(0), &SolveOptions::new(NeutralRule::Bd, 1e-9))?;
//! assert!((report.fixation - 0.4).abs() < 1e-9);
//! # Ok::<(), fixlab::Error>(())
//! ```
//!
//! [`monte_carlo`] simulates the biased processes directly and [`oracle`]
//! solves the full `2^N` chain for small graphs.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod generate;
pub mod graph;
pub mod io;
pub mod monte_carlo;
pub mod mttf;
pub mod oracle;
pub mod solver;

pub use bounds::{bound_report, lower_bound, upper_bound_single, BoundReport, UpperBound};
pub use dynamics::{
    init_vector, step, BiasedRule, NeutralRule, ProbabilityVector, Propagator, Rule, Summary,
};
pub use error::{Error, Result};
pub use generate::{generate, GeneratorSpec, GraphKind, Weighting};
pub use graph::{Configuration, Edge, EvolutionaryGraph, GraphSpec, GraphStats, Violation};
pub use monte_carlo::{
    estimate, required_runs, simulate_run, speedup_benchmark, EpsilonPolicy, SimulationSummary,
};
pub use mttf::{mttf_exact, mttf_lower_bound, MttfOptions, MttfReport};
pub use oracle::{build_chain, fixation_exact, mean_times_exact, ChainModel, MeanTimes};
pub use solver::{
    additivity_check, classify_vertices, solve, trajectory, undirected_closed_form, Criterion,
    SolveOptions, SolveReport, TraceRow, VertexClass,
};
