//! Graph and configuration file formats.
//!
//! Graphs are either JSON (`{"n": N, "edges": [[i, j, w], ...]}`) or a plain
//! edge list with one `i j w` triple per line. In the edge-list form `n` is
//! one more than the largest vertex id; blank lines and `#` comments are
//! skipped. Configurations are JSON arrays of vertex ids.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Configuration, Edge, EvolutionaryGraph, GraphSpec};

pub fn parse_edge_list(text: &str) -> Result<GraphSpec> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<_> = line.split_whitespace().collect();
        let bad = || {
            Error::Parse(format!(
                "line {}: expected `i j w`, got {line:?}",
                lineno + 1
            ))
        };
        if fields.len() != 3 {
            return Err(bad());
        }
        let i: usize = fields[0].parse().map_err(|_| bad())?;
        let j: usize = fields[1].parse().map_err(|_| bad())?;
        let w: f64 = fields[2].parse().map_err(|_| bad())?;
        n = n.max(i + 1).max(j + 1);
        edges.push(Edge::new(i, j, w));
    }
    Ok(GraphSpec::new(n, edges))
}

pub fn write_edge_list(spec: &GraphSpec) -> String {
    spec.edges
        .iter()
        .map(|e| format!("{} {} {}\n", e.source, e.target, e.weight))
        .collect()
}

/// Parses JSON when the first non-blank character is `{`, else an edge list.
pub fn parse_graph(text: &str) -> Result<GraphSpec> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        parse_edge_list(text)
    }
}

pub fn read_graph_spec(path: impl AsRef<Path>) -> Result<GraphSpec> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<EvolutionaryGraph> {
    read_graph_spec(path)?.try_into()
}

pub fn write_graph_json(path: impl AsRef<Path>, graph: &EvolutionaryGraph) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&graph.to_spec())?)?;
    Ok(())
}

/// Accepts a JSON array (`[0, 3]`) or a bare comma/space separated list.
pub fn parse_configuration(text: &str) -> Result<Configuration> {
    let t = text.trim();
    if t.starts_with('[') {
        return Ok(serde_json::from_str(t)?);
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad vertex id {s:?}")))
        })
        .collect()
}

pub fn read_configuration(path: impl AsRef<Path>) -> Result<Configuration> {
    parse_configuration(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_with_comments() {
        let spec = parse_graph("# two cycle\n0 1 1.0\n\n1 0 1 # back\n").unwrap();
        assert_eq!(spec.n, 2);
        assert_eq!(spec.edges, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)]);
    }

    #[test]
    fn edge_list_rejects_short_lines() {
        let err = parse_graph("0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn json_graph() {
        let spec =
            parse_graph(r#" {"n": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 0, 1.0]]}"#).unwrap();
        assert_eq!(spec.n, 3);
        let g: EvolutionaryGraph = spec.try_into().unwrap();
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn edge_list_round_trip() {
        let spec = GraphSpec::new(3, vec![Edge::new(0, 2, 0.25), Edge::new(2, 1, 1.0)]);
        assert_eq!(parse_edge_list(&write_edge_list(&spec)).unwrap(), spec);
    }

    #[test]
    fn configurations() {
        assert_eq!(
            parse_configuration("[2, 0]").unwrap(),
            Configuration::new([0, 2])
        );
        assert_eq!(
            parse_configuration("1,3 4").unwrap(),
            Configuration::new([1, 3, 4])
        );
        assert_eq!(parse_configuration("[]").unwrap(), Configuration::empty());
        assert!(parse_configuration("a").is_err());
    }
}
