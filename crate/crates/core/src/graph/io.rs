//! Versioned text format and DOT export for knowledge graphs.
//!
//! ```text
//! grm-graph 1
//! # key=value provenance lines
//! relationships 2
//! friends
//! family
//! objects 3
//! cup
//! ...
//! edges 2
//! 0 2 1.000000
//! 1 4 0.250000
//! ```
//! Edge endpoints use global node indices (relationship first).

use super::KnowledgeGraph;
use crate::data::{parse_num, Lines};
use crate::error::Result;
use crate::math::Matrix;
use std::fmt::Write as _;
use std::path::Path;

const GRAPH_MAGIC: &str = "grm-graph";
const GRAPH_VERSION: u32 = 1;

pub fn write_graph(graph: &KnowledgeGraph, header: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{GRAPH_MAGIC} {GRAPH_VERSION}");
    for (k, v) in header {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "relationships {}", graph.num_relationships());
    for n in graph.relationship_names() {
        let _ = writeln!(out, "{n}");
    }
    let _ = writeln!(out, "objects {}", graph.num_objects());
    for n in graph.object_names() {
        let _ = writeln!(out, "{n}");
    }
    let m = graph.num_relationships();
    let _ = writeln!(out, "edges {}", graph.edge_count());
    for r in 0..m {
        for o in graph.object_neighbors(r) {
            let _ = writeln!(out, "{r} {} {:.6}", m + o, graph.weight(r, o));
        }
    }
    out
}

pub fn save_graph(path: &Path, graph: &KnowledgeGraph, header: &[(String, String)]) -> Result<()> {
    std::fs::write(path, write_graph(graph, header))?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, &path.display().to_string())
}

fn counted_section(lines: &mut Lines, key: &str) -> Result<usize> {
    let line = lines.next_line()?;
    match line.split_once(' ') {
        Some((k, n)) if k == key => parse_num(lines, n.trim(), key),
        _ => Err(lines.err(format!("expected '{key} <count>'"))),
    }
}

/// Parses a graph; never returns a partially-read graph.
pub fn parse_graph(text: &str, source: &str) -> Result<KnowledgeGraph> {
    let mut lines = Lines::new(text, source);
    let head = lines.next_line()?;
    match head.split_once(' ') {
        Some((GRAPH_MAGIC, v)) if v.trim() == GRAPH_VERSION.to_string() => {}
        _ => return Err(lines.err(format!("not a {GRAPH_MAGIC} v{GRAPH_VERSION} file"))),
    }
    let m = counted_section(&mut lines, "relationships")?;
    let rel: Vec<String> = (0..m)
        .map(|_| lines.next_line().map(str::to_string))
        .collect::<Result<_>>()?;
    let n = counted_section(&mut lines, "objects")?;
    let obj: Vec<String> = (0..n)
        .map(|_| lines.next_line().map(str::to_string))
        .collect::<Result<_>>()?;
    let e = counted_section(&mut lines, "edges")?;
    let mut w = Matrix::zeros(m, n);
    for _ in 0..e {
        let line = lines.next_line()?;
        let toks: Vec<&str> = line.split_ascii_whitespace().collect();
        if toks.len() != 3 {
            return Err(lines.err("expected '<i> <j> <weight>'"));
        }
        let i: usize = parse_num(&lines, toks[0], "edge source")?;
        let j: usize = parse_num(&lines, toks[1], "edge target")?;
        let weight: f64 = parse_num(&lines, toks[2], "edge weight")?;
        if i >= m || j < m || j >= m + n {
            return Err(lines.err(format!("edge ({i}, {j}) is not relationship→object")));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(lines.err(format!("edge weight {weight} outside (0, 1]")));
        }
        if w[(i, j - m)] != 0.0 {
            return Err(lines.err(format!("duplicate edge ({i}, {j})")));
        }
        w[(i, j - m)] = weight;
    }
    lines.expect_end()?;
    KnowledgeGraph::from_bipartite(rel, obj, &w).map_err(|err| lines.err(err.to_string()))
}

/// Graphviz rendering: relationship nodes as boxes, objects as ellipses,
/// edge pen width proportional to weight.
pub fn graph_to_dot(graph: &KnowledgeGraph) -> String {
    let mut out = String::from("graph knowledge {\n  layout=neato;\n  overlap=false;\n");
    let m = graph.num_relationships();
    for (i, name) in graph.relationship_names().iter().enumerate() {
        let _ = writeln!(out, "  n{i} [label=\"{name}\", shape=box, color=red];");
    }
    for (o, name) in graph.object_names().iter().enumerate() {
        let _ = writeln!(out, "  n{} [label=\"{name}\", shape=ellipse, color=blue];", m + o);
    }
    for r in 0..m {
        for o in graph.object_neighbors(r) {
            let w = graph.weight(r, o);
            let _ = writeln!(
                out,
                "  n{r} -- n{} [weight={w:.6}, penwidth={:.3}];",
                m + o,
                0.5 + 3.0 * w
            );
        }
    }
    out.push_str("}\n");
    out
}
