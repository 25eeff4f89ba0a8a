use thiserror::Error;

use crate::graph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {}", format_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("vertex {vertex} is out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("probability vector has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vertex {vertex} has no incoming edge; the {rule} update is undefined")]
    NoIncomingEdge { vertex: usize, rule: &'static str },

    #[error("graph has no edges; the {rule} update is undefined")]
    NoEdges { rule: &'static str },

    #[error("configurations overlap at vertex {vertex}")]
    OverlappingConfigurations { vertex: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator failed to produce a connected graph after {attempts} attempts")]
    GeneratorExhausted { attempts: usize },

    #[error("graph must be undirected and unweighted")]
    NotUndirectedUnweighted,

    #[error("no upper-bound formula is known for the {0} rule")]
    NoBoundFormula(&'static str),

    #[error("{n} vertices exceeds the exact-chain cap of {cap}")]
    ChainTooLarge { n: usize, cap: usize },

    #[error("absorbing-chain system is singular")]
    SingularSystem,

    #[error("iterative solve did not converge after {iterations} sweeps")]
    NotConverged { iterations: usize },

    #[error("fixation probability is zero; the conditional mean time is undefined")]
    ZeroFixation,

    #[error("run did not absorb within {cap} events")]
    StepCapExceeded { cap: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "invalid_graph",
            Error::NotStronglyConnected => "not_strongly_connected",
            Error::VertexOutOfRange { .. } => "vertex_out_of_range",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NoIncomingEdge { .. } => "no_incoming_edge",
            Error::NoEdges { .. } => "no_edges",
            Error::OverlappingConfigurations { .. } => "overlapping_configurations",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GeneratorExhausted { .. } => "generator_exhausted",
            Error::NotUndirectedUnweighted => "not_undirected_unweighted",
            Error::NoBoundFormula(_) => "no_bound_formula",
            Error::ChainTooLarge { .. } => "chain_too_large",
            Error::SingularSystem => "singular_system",
            Error::NotConverged { .. } => "not_converged",
            Error::ZeroFixation => "zero_fixation",
            Error::StepCapExceeded { .. } => "step_cap_exceeded",
            Error::Parse(_) => "parse_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
