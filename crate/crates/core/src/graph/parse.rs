//! Edge-list and JSON graph formats.
//!
//! Edge list: an optional first line `N`, then one `i j a_ij` line per edge
//! (0-based, whitespace separated). Blank lines and `#` comments are skipped.
//! Without the header, the node count is the largest index plus one.
//!
//! JSON: `{"n": N, "edges": [[i, j, w], ...]}`.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::WeightedDigraph;
use crate::error::{Error, GraphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&WeightedDigraph> for GraphDocument {
    fn from(g: &WeightedDigraph) -> Self {
        Self {
            n: g.n_nodes(),
            edges: g.edges().iter().map(|e| (e.target, e.source, e.weight)).collect(),
        }
    }
}

impl TryFrom<GraphDocument> for WeightedDigraph {
    type Error = GraphError;

    fn try_from(doc: GraphDocument) -> std::result::Result<Self, GraphError> {
        WeightedDigraph::new(doc.n, doc.edges)
    }
}

/// Parses either format; JSON is recognised by a leading `{`.
pub fn parse_graph(text: &str) -> Result<WeightedDigraph> {
    if text.trim_start().starts_with('{') {
        let doc: GraphDocument = serde_json::from_str(text)?;
        return Ok(WeightedDigraph::try_from(doc)?);
    }
    parse_edge_list(text)
}

fn parse_edge_list(text: &str) -> Result<WeightedDigraph> {
    let mut header: Option<usize> = None;
    let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut first = true;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if first && fields.len() == 1 {
            first = false;
            let n = fields[0].parse::<usize>().map_err(|_| Error::Syntax {
                line: line_no,
                message: format!("expected node count, found `{}`", fields[0]),
            })?;
            if n == 0 {
                return Err(Error::Parse { line: line_no, source: GraphError::Empty });
            }
            header = Some(n);
            continue;
        }
        first = false;
        if fields.len() != 3 {
            return Err(Error::Syntax {
                line: line_no,
                message: format!("expected `i j weight`, found {} fields", fields.len()),
            });
        }
        let index = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Syntax {
                line: line_no,
                message: format!("invalid node index `{s}`"),
            })
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w = fields[2].parse::<f64>().map_err(|_| Error::Syntax {
            line: line_no,
            message: format!("invalid weight `{}`", fields[2]),
        })?;
        rows.push((line_no, i, j, w));
    }

    let n = match header {
        Some(n) => n,
        None => rows.iter().map(|&(_, i, j, _)| i.max(j) + 1).max().ok_or(Error::Syntax {
            line: 1,
            message: "empty graph document".into(),
        })?,
    };

    // validate row by row so errors carry their line
    let mut seen = HashSet::new();
    for &(line, i, j, w) in &rows {
        super::validate_edge(n, i, j, w).map_err(|source| Error::Parse { line, source })?;
        if !seen.insert((i, j)) {
            return Err(Error::Parse { line, source: GraphError::DuplicateEdge { i, j } });
        }
    }
    Ok(WeightedDigraph::new(n, rows.into_iter().map(|(_, i, j, w)| (i, j, w)))?)
}

impl WeightedDigraph {
    /// Edge-list text with a node-count header; weights round-trip exactly.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n_nodes());
        for e in self.edges() {
            let _ = writeln!(out, "{} {} {}", e.target, e.source, e.weight);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDocument::from(self)).expect("graph documents always serialize")
    }
}
