//! Undirected, unweighted attributed graphs.
//!
//! Edges are stored once as `(u, v)` with `u < v`, together with a
//! symmetric compressed neighbour list used by the operator kernels.

mod io;
mod sbm;
mod split;

pub use io::{load_dataset, load_graph, parse_dataset, parse_graph, write_bundle, write_edge_list, GraphFormat};
pub use sbm::{random_connected_graph, sample_sbm, SbmSpec};
pub use split::{planetoid_split, split_indices, split_nodes, Fractions, SplitAssignment};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("edge ({u}, {v}) out of range for n = {n}")]
    IndexOutOfRange { u: usize, v: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("attribute matrix has shape {rows}x{cols}, expected {n} rows and at least one column")]
    AttributeShape { rows: usize, cols: usize, n: usize },
    #[error("label vector has length {len}, expected {n}")]
    LabelLength { len: usize, n: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node {node} has degree {degree} > max_degree {max}")]
    DegreeExceedsMax { node: usize, degree: usize, max: usize },
    #[error("invalid SBM specification: {0}")]
    InvalidSbm(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("graph has no node labels")]
    MissingLabels,
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    None,
    /// One class per node.
    Node(Vec<usize>),
    /// A single class for the whole graph.
    Graph(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    attributes: Array2<f64>,
    labels: Labels,
    declared_classes: Option<usize>,
    name: String,
}

impl AttributedGraph {
    /// Builds a validated graph. Edges may be given in either orientation
    /// and may repeat; they are symmetrised and deduplicated.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        attributes: Array2<f64>,
        labels: Labels,
        name: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::IndexOutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        let (rows, cols) = attributes.dim();
        if rows != n || cols == 0 {
            return Err(GraphError::AttributeShape { rows, cols, n });
        }
        if let Labels::Node(ref y) = labels {
            if y.len() != n {
                return Err(GraphError::LabelLength { len: y.len(), n });
            }
        }
        let (offsets, neighbors) = build_adjacency(n, &canon);
        Ok(Self {
            n,
            edges: canon,
            offsets,
            neighbors,
            attributes,
            labels,
            declared_classes: None,
            name: name.into(),
        })
    }

    /// Graph with a single constant attribute column and no labels.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n, edges, Array2::ones((n.max(1), 1)), Labels::None, "graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbours of `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn attributes(&self) -> &Array2<f64> {
        &self.attributes
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Node(y) => Some(y),
            _ => None,
        }
    }

    pub fn graph_label(&self) -> Option<usize> {
        match self.labels {
            Labels::Graph(c) => Some(c),
            _ => None,
        }
    }

    /// Class count: the declared header value if present, else inferred
    /// from the labels.
    pub fn num_classes(&self) -> usize {
        let inferred = match &self.labels {
            Labels::Node(y) => y.iter().max().map_or(0, |m| m + 1),
            Labels::Graph(c) => c + 1,
            Labels::None => 0,
        };
        self.declared_classes.unwrap_or(0).max(inferred)
    }

    pub fn declared_classes(&self) -> Option<usize> {
        self.declared_classes
    }

    pub fn with_declared_classes(mut self, classes: usize) -> Self {
        self.declared_classes = Some(classes);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_attributes(mut self, attributes: Array2<f64>) -> Result<Self> {
        let (rows, cols) = attributes.dim();
        if rows != self.n || cols == 0 {
            return Err(GraphError::AttributeShape { rows, cols, n: self.n });
        }
        self.attributes = attributes;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if let Labels::Node(ref y) = labels {
            if y.len() != self.n {
                return Err(GraphError::LabelLength { len: y.len(), n: self.n });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }

    /// Connected component id per node (ids in order of first appearance).
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }
}

fn build_adjacency(n: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut deg = vec![0usize; n];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + deg[i];
    }
    let mut fill = offsets[..n].to_vec();
    let mut neighbors = vec![0usize; offsets[n]];
    for &(u, v) in edges {
        neighbors[fill[u]] = v;
        fill[u] += 1;
        neighbors[fill[v]] = u;
        fill[v] += 1;
    }
    for i in 0..n {
        neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, neighbors)
}

/// Node degrees `d_i = sum_j A_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(Vec<usize>);

impl DegreeVector {
    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }
}

pub fn degrees(g: &AttributedGraph) -> DegreeVector {
    DegreeVector((0..g.n()).map(|i| g.degree(i)).collect())
}

/// Replaces the attributes with one-hot encodings of node degree, with
/// `max_degree + 1` columns.
pub fn onehot_degree_attributes(g: &AttributedGraph, max_degree: usize) -> Result<AttributedGraph> {
    let mut x = Array2::zeros((g.n(), max_degree + 1));
    for i in 0..g.n() {
        let d = g.degree(i);
        if d > max_degree {
            return Err(GraphError::DegreeExceedsMax { node: i, degree: d, max: max_degree });
        }
        x[[i, d]] = 1.0;
    }
    g.clone().with_attributes(x)
}

/// Column-wise z-scores (population std). Constant columns become zero.
pub fn standardize_columns(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows().max(1) as f64;
    let mut out = x.clone();
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std > 0.0 {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standardized_columns_have_zero_mean_unit_std() {
        let x = ndarray::array![[1.0, 5.0, 2.0], [1.0, 1.0, 4.0], [1.0, 3.0, 9.0]];
        let z = standardize_columns(&x);
        assert!(z.column(0).iter().all(|&v| v == 0.0));
        for c in 1..3 {
            let col = z.column(c);
            assert!(col.sum().abs() < 1e-12);
            assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        }
    }

    fn k3() -> AttributedGraph {
        AttributedGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn p3() -> AttributedGraph {
        AttributedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&k3()).values(), &[2, 2, 2]);
        assert_eq!(degrees(&p3()).values(), &[1, 2, 1]);
        let g = AttributedGraph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(degrees(&g).values()[3], 0);
    }

    #[test]
    fn symmetrises_and_dedups() {
        let g = AttributedGraph::from_edges(3, [(1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(AttributedGraph::from_edges(0, []).unwrap_err(), GraphError::Empty);
        assert!(matches!(
            AttributedGraph::from_edges(3, [(0, 5)]),
            Err(GraphError::IndexOutOfRange { u: 0, v: 5, n: 3 })
        ));
        assert_eq!(AttributedGraph::from_edges(3, [(1, 1)]).unwrap_err(), GraphError::SelfLoop(1));
        let bad = AttributedGraph::new(3, [], Array2::zeros((2, 1)), Labels::None, "x");
        assert!(matches!(bad, Err(GraphError::AttributeShape { .. })));
    }

    #[test]
    fn onehot_degrees() {
        let g = onehot_degree_attributes(&p3(), 2).unwrap();
        let x = g.attributes();
        assert_eq!(x.row(0).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(x.row(1).to_vec(), vec![0.0, 0.0, 1.0]);
        assert_eq!(x.row(2).to_vec(), vec![0.0, 1.0, 0.0]);
        let g = onehot_degree_attributes(&k3(), 2).unwrap();
        assert!(g.attributes().rows().into_iter().all(|r| r.to_vec() == vec![0.0, 0.0, 1.0]));
        let iso = AttributedGraph::from_edges(2, []).unwrap();
        let g = onehot_degree_attributes(&iso, 0).unwrap();
        assert_eq!(g.attributes()[[0, 0]], 1.0);
        assert!(matches!(
            onehot_degree_attributes(&k3(), 1),
            Err(GraphError::DegreeExceedsMax { degree: 2, max: 1, .. })
        ));
    }

    #[test]
    fn class_count_prefers_declared() {
        let g = p3().with_labels(Labels::Node(vec![0, 1, 0])).unwrap();
        assert_eq!(g.num_classes(), 2);
        assert_eq!(g.with_declared_classes(7).num_classes(), 7);
    }

    proptest! {
        #[test]
        fn adjacency_symmetric_and_degree_sum(n in 1usize..30, raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80)) {
            let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n, v % n)).filter(|(u, v)| u != v).collect();
            let g = AttributedGraph::from_edges(n, edges).unwrap();
            let a = g.adjacency_dense();
            prop_assert_eq!(&a, &a.t());
            prop_assert!(a.diag().iter().all(|&x| x == 0.0));
            prop_assert_eq!(degrees(&g).sum(), 2 * g.edge_count());
            for i in 0..n {
                prop_assert_eq!(a.row(i).sum() as usize, g.degree(i));
            }
        }
    }
}
