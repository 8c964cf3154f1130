//! Random graph samplers.

use super::{AttributedGraph, GraphError, Labels, Result};
use crate::rng::seeded;
use ndarray::Array2;
use rand::Rng;

/// Planted-partition stochastic blockmodel: `k` equal communities of
/// `community_size` nodes, within-community edge probability `p`,
/// between-community probability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmSpec {
    pub k: usize,
    pub community_size: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GraphError::InvalidSbm(m.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.community_size == 0 {
            return bad("community_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.q) {
            return bad("p and q must lie in [0, 1]");
        }
        if self.p < self.q {
            return bad("p must be at least q");
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.k * self.community_size
    }
}

/// Samples a blockmodel graph.
///
/// Node `i` belongs to community `i / community_size`. Every node gets
/// the constant attribute vector of ones (length `k`) except one
/// randomly chosen node per community, which carries the one-hot code
/// of its community.
pub fn sample_sbm(spec: &SbmSpec) -> Result<AttributedGraph> {
    spec.validate()?;
    let n = spec.n();
    let size = spec.community_size;
    let mut rng = seeded(spec.seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = if i / size == j / size { spec.p } else { spec.q };
            if rng.random::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    let mut x = Array2::ones((n, spec.k));
    for c in 0..spec.k {
        let node = c * size + rng.random_range(0..size);
        x.row_mut(node).fill(0.0);
        x[[node, c]] = 1.0;
    }
    let labels = (0..n).map(|i| i / size).collect();
    let name = format!("sbm_k{}_s{}_p{}_q{}", spec.k, size, spec.p, spec.q);
    Ok(AttributedGraph::new(n, edges, x, Labels::Node(labels), name)?.with_declared_classes(spec.k))
}

/// Connected graph: a random recursive spanning tree plus independent
/// extra edges with probability `p`. Attributes are a single ones column.
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Result<AttributedGraph> {
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    AttributedGraph::from_edges(n, edges)
}
