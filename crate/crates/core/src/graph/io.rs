//! Text formats.
//!
//! Edge list:
//!
//! ```text
//! 3
//! 0 1
//! 1 2
//! ```
//!
//! Graph bundle (one or more graphs per file):
//!
//! ```text
//! n 3 d 2 classes 2
//! E
//! 0 1
//! 1 2
//! X
//! 1 0
//! 0 1
//! 1 0
//! Y
//! 0 1 0
//! ```
//!
//! `Y` holds either `n` node labels or a single graph label. Blank lines
//! and lines starting with `#` are ignored.

use super::{AttributedGraph, GraphError, Labels, Result};
use crate::fmt::g17;
use ndarray::Array2;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    Bundle,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "edge_list" | "edgelist" => Ok(Self::EdgeList),
            "bundle" | "graph_bundle" => Ok(Self::Bundle),
            other => Err(format!("unknown graph format '{other}' (expected edge_list or bundle)")),
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse { line, msg: msg.into() }
}

fn parse_tok<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("invalid {what} '{tok}'")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_pair(l: &str, line: usize) -> Result<(usize, usize)> {
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(perr(line, format!("expected 'u v', found '{l}'")));
    }
    Ok((parse_tok(toks[0], line, "node index")?, parse_tok(toks[1], line, "node index")?))
}

fn parse_edge_list(text: &str) -> Result<AttributedGraph> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or(GraphError::Empty)?;
    let n: usize = parse_tok(header, hl, "node count")?;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut edges = Vec::new();
    for (ln, l) in lines {
        let (u, v) = parse_pair(l, ln)?;
        if u >= n || v >= n {
            return Err(GraphError::IndexOutOfRange { u, v, n });
        }
        if u != v {
            edges.push((u, v));
        } else {
            return Err(perr(ln, format!("self-loop on node {u}")));
        }
    }
    AttributedGraph::new(n, edges, Array2::ones((n, 1)), Labels::None, "graph")
}

#[derive(PartialEq)]
enum Section {
    Header,
    Edges,
    Attrs,
    Labels,
}

struct RawBundle {
    line: usize,
    n: usize,
    d: usize,
    classes: usize,
    edges: Vec<(usize, usize)>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
}

fn parse_header(l: &str, line: usize) -> Result<RawBundle> {
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "n" || toks[2] != "d" || toks[4] != "classes" {
        return Err(perr(line, format!("expected 'n <int> d <int> classes <int>', found '{l}'")));
    }
    let n: usize = parse_tok(toks[1], line, "node count")?;
    let d: usize = parse_tok(toks[3], line, "attribute dimension")?;
    let classes: usize = parse_tok(toks[5], line, "class count")?;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if d == 0 {
        return Err(perr(line, "attribute dimension must be at least 1"));
    }
    Ok(RawBundle { line, n, d, classes, edges: Vec::new(), rows: Vec::new(), labels: None })
}

fn parse_bundles(text: &str) -> Result<Vec<RawBundle>> {
    let mut out: Vec<RawBundle> = Vec::new();
    let mut section = Section::Header;
    for (ln, l) in content_lines(text) {
        if l.starts_with("n ") || l == "n" {
            out.push(parse_header(l, ln)?);
            section = Section::Header;
            continue;
        }
        let cur = out.last_mut().ok_or_else(|| perr(ln, "missing bundle header"))?;
        match l {
            "E" => {
                section = Section::Edges;
                continue;
            }
            "X" => {
                section = Section::Attrs;
                continue;
            }
            "Y" => {
                section = Section::Labels;
                cur.labels.get_or_insert_with(Vec::new);
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => return Err(perr(ln, format!("expected section marker E, X or Y, found '{l}'"))),
            Section::Edges => {
                let (u, v) = parse_pair(l, ln)?;
                if u >= cur.n || v >= cur.n {
                    return Err(GraphError::IndexOutOfRange { u, v, n: cur.n });
                }
                if u == v {
                    return Err(perr(ln, format!("self-loop on node {u}")));
                }
                cur.edges.push((u, v));
            }
            Section::Attrs => {
                let row = l
                    .split_whitespace()
                    .map(|t| parse_tok::<f64>(t, ln, "attribute value"))
                    .collect::<Result<Vec<_>>>()?;
                if row.len() != cur.d {
                    return Err(perr(ln, format!("attribute row has {} values, expected {}", row.len(), cur.d)));
                }
                if cur.rows.len() == cur.n {
                    return Err(perr(ln, format!("more than n = {} attribute rows", cur.n)));
                }
                cur.rows.push(row);
            }
            Section::Labels => {
                let labels = cur.labels.as_mut().expect("Y section opened");
                for t in l.split_whitespace() {
                    labels.push(parse_tok(t, ln, "label")?);
                }
            }
        }
    }
    Ok(out)
}

fn finish(raw: RawBundle, index: usize, multi: bool) -> Result<AttributedGraph> {
    if raw.rows.len() != raw.n {
        return Err(perr(raw.line, format!("bundle declares n = {} but X has {} rows", raw.n, raw.rows.len())));
    }
    let flat: Vec<f64> = raw.rows.into_iter().flatten().collect();
    let x = Array2::from_shape_vec((raw.n, raw.d), flat).expect("row lengths checked");
    let labels = match raw.labels {
        None => Labels::None,
        Some(y) if y.len() == 1 && (multi || raw.n > 1) => Labels::Graph(y[0]),
        Some(y) if y.len() == raw.n => Labels::Node(y),
        Some(y) => {
            return Err(perr(raw.line, format!("Y has {} labels, expected {} or 1", y.len(), raw.n)));
        }
    };
    let name = if multi { format!("graph{index}") } else { "graph".to_string() };
    Ok(AttributedGraph::new(raw.n, raw.edges, x, labels, name)?.with_declared_classes(raw.classes))
}

/// Parses a single graph from text.
pub fn parse_graph(text: &str, format: GraphFormat) -> Result<AttributedGraph> {
    match format {
        GraphFormat::EdgeList => parse_edge_list(text),
        GraphFormat::Bundle => {
            let mut raws = parse_bundles(text)?;
            match raws.len() {
                0 => Err(GraphError::Empty),
                1 => finish(raws.pop().expect("one bundle"), 0, false),
                k => Err(perr(raws[1].line, format!("expected a single graph, found {k} bundles"))),
            }
        }
    }
}

/// Parses a multi-graph bundle file (graph classification datasets).
pub fn parse_dataset(text: &str) -> Result<Vec<AttributedGraph>> {
    let raws = parse_bundles(text)?;
    if raws.is_empty() {
        return Err(GraphError::Empty);
    }
    raws.into_iter().enumerate().map(|(i, r)| finish(r, i, true)).collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))
}

pub fn load_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<AttributedGraph> {
    let path = path.as_ref();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph").to_string();
    Ok(parse_graph(&read(path)?, format)?.with_name(stem))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<AttributedGraph>> {
    parse_dataset(&read(path.as_ref())?)
}

/// Writes `g` in bundle format. Attribute values use 17 significant digits.
pub fn write_bundle<W: Write>(g: &AttributedGraph, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "n {} d {} classes {}", g.n(), g.attribute_dim(), g.num_classes())?;
    writeln!(w, "E")?;
    for &(u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    writeln!(w, "X")?;
    for row in g.attributes().rows() {
        let line: Vec<String> = row.iter().map(|&x| g17(x)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    match g.labels() {
        Labels::None => {}
        Labels::Node(y) => {
            writeln!(w, "Y")?;
            let line: Vec<String> = y.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Labels::Graph(c) => {
            writeln!(w, "Y")?;
            writeln!(w, "{c}")?;
        }
    }
    Ok(())
}

pub fn write_edge_list<W: Write>(g: &AttributedGraph, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{}", g.n())?;
    for &(u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}
