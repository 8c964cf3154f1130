use super::{ClampEpsilon, CsrMatrix, OperatorError, ParamGradient, ParamSet, Result};
use crate::graph::AttributedGraph;
use crate::par;
use ndarray::{Array2, ArrayView2};

/// Per-node quantities of `gamma(A, S)` for one graph and one parameter
/// tuple. Building it costs `O(n)`; every kernel below is `O(nnz * d)`.
#[derive(Debug, Clone)]
pub struct PreparedOperator<'g> {
    g: &'g AttributedGraph,
    params: ParamSet,
    eps: ClampEpsilon,
    base: Vec<f64>,
    active: Vec<bool>,
    ln_base: Vec<f64>,
    pow1: Vec<f64>,
    pow2: Vec<f64>,
    pow3: Vec<f64>,
    diag: Vec<f64>,
    clamps: usize,
}

impl<'g> PreparedOperator<'g> {
    pub fn new(g: &'g AttributedGraph, params: ParamSet, eps: ClampEpsilon) -> Self {
        let n = g.n();
        let ParamSet { m1, m2, m3, e1, e2, e3, a } = params;
        let mut base = Vec::with_capacity(n);
        let mut active = Vec::with_capacity(n);
        for i in 0..n {
            let raw = g.degree(i) as f64 + a;
            let unclamped = raw > eps.get();
            active.push(unclamped);
            base.push(if unclamped { raw } else { eps.get() });
        }
        let ln_base: Vec<f64> = base.iter().map(|b| b.ln()).collect();
        let pow = |e: f64| -> Vec<f64> { base.iter().map(|b| b.powf(e)).collect() };
        let (pow1, pow2, pow3) = (pow(e1), pow(e2), pow(e3));
        let diag = (0..n).map(|i| m1 * pow1[i] + m2 * a * pow2[i] * pow3[i] + m3).collect();
        let clamps = active.iter().filter(|x| !**x).count();
        Self { g, params, eps, base, active, ln_base, pow1, pow2, pow3, diag, clamps }
    }

    pub fn graph(&self) -> &'g AttributedGraph {
        self.g
    }

    pub fn params(&self) -> ParamSet {
        self.params
    }

    /// Clamped augmented degrees `max(d_i + a, eps)`.
    pub fn augmented_degrees(&self) -> &[f64] {
        &self.base
    }

    /// Nodes whose augmented degree hit the clamp.
    pub fn clamp_count(&self) -> usize {
        self.clamps
    }

    /// Diagonal of `gamma`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    #[inline]
    fn offdiag(&self, i: usize, j: usize) -> f64 {
        self.params.m2 * (self.pow2[i] * self.pow3[j])
    }

    fn check_rows(&self, m: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
        if m.nrows() != self.g.n() {
            return Err(OperatorError::Dimension(format!(
                "{what} has {} rows, graph has {} nodes",
                m.nrows(),
                self.g.n()
            )));
        }
        Ok(())
    }

    /// Materialises `gamma` in CSR form (pattern: diagonal plus edges).
    pub fn build(&self) -> PgsoMatrix {
        let n = self.g.n();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(n + 2 * self.g.edge_count());
        let mut values = Vec::with_capacity(indices.capacity());
        indptr.push(0);
        for i in 0..n {
            let mut diag_done = false;
            for &j in self.g.neighbors(i) {
                if !diag_done && j > i {
                    indices.push(i);
                    values.push(self.diag[i]);
                    diag_done = true;
                }
                indices.push(j);
                values.push(self.offdiag(i, j));
            }
            if !diag_done {
                indices.push(i);
                values.push(self.diag[i]);
            }
            indptr.push(indices.len());
        }
        let matrix = CsrMatrix::from_parts(n, n, indptr, indices, values).expect("pattern built sorted");
        PgsoMatrix {
            matrix,
            aug_degrees: self.base.clone(),
            params: self.params,
            clamp_epsilon: self.eps,
            clamp_count: self.clamps,
        }
    }

    /// `gamma * h` without materialising `gamma`.
    pub fn apply(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_rows(&h.view(), "input")?;
        let mut out = Array2::zeros(h.raw_dim());
        par::for_each_row_mut(&mut out, |i, mut row| {
            row.scaled_add(self.diag[i], &h.row(i));
            for &j in self.g.neighbors(i) {
                row.scaled_add(self.offdiag(i, j), &h.row(j));
            }
        });
        Ok(out)
    }

    /// `gamma^T * upstream` without materialising `gamma`.
    pub fn input_gradient(&self, upstream: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_rows(&upstream.view(), "upstream")?;
        let mut out = Array2::zeros(upstream.raw_dim());
        par::for_each_row_mut(&mut out, |j, mut row| {
            row.scaled_add(self.diag[j], &upstream.row(j));
            for &i in self.g.neighbors(j) {
                row.scaled_add(self.offdiag(i, j), &upstream.row(i));
            }
        });
        Ok(out)
    }

    /// `<upstream, d(gamma h)/d theta>` for all seven parameters.
    pub fn param_gradient(&self, h: &Array2<f64>, upstream: &Array2<f64>) -> Result<ParamGradient> {
        self.check_rows(&h.view(), "input")?;
        self.check_rows(&upstream.view(), "upstream")?;
        if h.ncols() != upstream.ncols() {
            return Err(OperatorError::Dimension(format!(
                "input has {} columns, upstream has {}",
                h.ncols(),
                upstream.ncols()
            )));
        }
        let ParamSet { m1, m2, e1, e2, e3, a, .. } = self.params;
        let per_row = par::map_indexed(self.g.n(), |i| {
            let ui = upstream.row(i);
            let hu = ui.dot(&h.row(i));
            // neighbour sums: s = sum b_j^e3 <u_i,h_j>, t adds ln b_j, r is d(b_j^e3)/da
            let (mut s, mut t, mut r) = (0.0, 0.0, 0.0);
            for &j in self.g.neighbors(i) {
                let dot = ui.dot(&h.row(j));
                s += self.pow3[j] * dot;
                t += self.pow3[j] * self.ln_base[j] * dot;
                if self.active[j] {
                    r += e3 * self.pow3[j] / self.base[j] * dot;
                }
            }
            let (p1, p2, p3, ln_b, b) = (self.pow1[i], self.pow2[i], self.pow3[i], self.ln_base[i], self.base[i]);
            let c = if self.active[i] { 1.0 } else { 0.0 };
            let self_loop = a * p2 * p3 * hu;
            let middle = p2 * s + self_loop;
            [
                p1 * hu,
                middle,
                hu,
                m1 * ln_b * p1 * hu,
                m2 * ln_b * middle,
                m2 * (p2 * t + self_loop * ln_b),
                c * m1 * e1 * p1 / b * hu
                    + c * m2 * e2 * p2 / b * s
                    + m2 * p2 * r
                    + m2 * p2 * p3 * hu
                    + c * m2 * (e2 + e3) * self_loop / b,
            ]
        });
        let mut acc = [0.0; 7];
        for row in per_row {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        Ok(ParamGradient::from_array(acc))
    }
}

/// Sparse materialisation of `gamma(A, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgsoMatrix {
    pub matrix: CsrMatrix,
    pub aug_degrees: Vec<f64>,
    pub params: ParamSet,
    pub clamp_epsilon: ClampEpsilon,
    pub clamp_count: usize,
}

impl PgsoMatrix {
    pub fn n(&self) -> usize {
        self.matrix.shape().0
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.matrix.to_dense()
    }

    pub fn matmul(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        self.matrix.matmul(h)
    }
}

pub fn build_operator(g: &AttributedGraph, s: ParamSet, eps: ClampEpsilon) -> PgsoMatrix {
    PreparedOperator::new(g, s, eps).build()
}

pub fn apply(g: &AttributedGraph, s: ParamSet, h: &Array2<f64>, eps: ClampEpsilon) -> Result<Array2<f64>> {
    PreparedOperator::new(g, s, eps).apply(h)
}

pub fn param_gradient(
    g: &AttributedGraph,
    s: ParamSet,
    h: &Array2<f64>,
    upstream: &Array2<f64>,
    eps: ClampEpsilon,
) -> Result<ParamGradient> {
    PreparedOperator::new(g, s, eps).param_gradient(h, upstream)
}

pub fn input_gradient(g: &AttributedGraph, s: ParamSet, upstream: &Array2<f64>, eps: ClampEpsilon) -> Result<Array2<f64>> {
    PreparedOperator::new(g, s, eps).input_gradient(upstream)
}

/// True iff every nonzero off-diagonal entry of `m` lies on an edge of `g`.
pub fn is_gso(m: &CsrMatrix, g: &AttributedGraph) -> bool {
    let (rows, cols) = m.shape();
    if rows != g.n() || cols != g.n() {
        return false;
    }
    (0..rows).all(|i| m.row(i).all(|(j, v)| i == j || v == 0.0 || g.has_edge(i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_connected_graph;
    use crate::operator::Preset;
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    fn eps() -> ClampEpsilon {
        ClampEpsilon::default()
    }

    fn k3() -> AttributedGraph {
        AttributedGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn p3() -> AttributedGraph {
        AttributedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn random_params(rng: &mut impl Rng, lo: f64, hi: f64) -> ParamSet {
        let mut v = [0.0; 7];
        for x in &mut v {
            *x = rng.random_range(lo..hi);
        }
        ParamSet::from_array(v)
    }

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn adjacency_preset_on_k3() {
        let m = build_operator(&k3(), Preset::Adjacency.params(), eps()).to_dense();
        assert_eq!(m, k3().adjacency_dense());
    }

    #[test]
    fn laplacian_on_p3() {
        let m = build_operator(&p3(), Preset::UnnormalisedLaplacian.params(), eps()).to_dense();
        let expected = array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        assert_eq!(m, expected);
    }

    #[test]
    fn gcn_norm_on_p3() {
        // A_1 = A + I, degrees (2, 3, 2)
        let m = build_operator(&p3(), Preset::GcnNorm.params(), eps()).to_dense();
        let a1 = array![[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        let d = [2.0f64, 3.0, 2.0];
        let expected = Array2::from_shape_fn((3, 3), |(i, j)| a1[[i, j]] / (d[i] * d[j]).sqrt());
        assert!(max_abs_diff(&m, &expected) < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let g = p3();
        let h = Array2::eye(3);
        let out = apply(&g, Preset::Adjacency.params(), &h, eps()).unwrap();
        assert_eq!(out, g.adjacency_dense());
        let id = ParamSet::new(0.0, 0.0, 1.0, 0.3, -0.2, 0.7, 0.0);
        let h = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(apply(&g, id, &h, eps()).unwrap(), h);
        assert!(apply(&g, id, &Array2::zeros((2, 2)), eps()).is_err());
    }

    #[test]
    fn apply_matches_materialised_product() {
        let mut rng = seeded(1);
        for t in 0..50 {
            let n = rng.random_range(2..25);
            let g = random_connected_graph(n, 0.2, t).unwrap();
            let s = random_params(&mut rng, -1.5, 1.5);
            let h = random_matrix(&mut rng, n, 3);
            let free = apply(&g, s, &h, eps()).unwrap();
            let mat = build_operator(&g, s, eps()).matmul(&h).unwrap();
            assert!(max_abs_diff(&free, &mat) <= 1e-12 * (1.0 + mat.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        }
    }

    #[test]
    fn input_gradient_is_transpose_product() {
        let mut rng = seeded(2);
        for t in 0..30 {
            let n = rng.random_range(2..20);
            let g = random_connected_graph(n, 0.3, 100 + t).unwrap();
            let s = random_params(&mut rng, -1.0, 1.0);
            let u = random_matrix(&mut rng, n, 2);
            let dense = build_operator(&g, s, eps()).to_dense();
            let expected = dense.t().dot(&u);
            let got = input_gradient(&g, s, &u, eps()).unwrap();
            assert!(max_abs_diff(&got, &expected) <= 1e-12 * (1.0 + expected.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        }
        let g = p3();
        let z = Array2::zeros((3, 2));
        assert_eq!(input_gradient(&g, Preset::RandomWalkLaplacian.params(), &z, eps()).unwrap(), z);
        let sym = ParamSet::new(0.4, -1.2, 0.3, 0.5, -0.25, -0.25, 0.6);
        let u = array![[1.0], [-2.0], [0.5]];
        let lhs = input_gradient(&g, sym, &u, eps()).unwrap();
        let rhs = apply(&g, sym, &u, eps()).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn param_gradient_trivial_cases() {
        let g = p3();
        let h = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let z = Array2::zeros((3, 2));
        let grad = param_gradient(&g, Preset::Adjacency.params(), &h, &z, eps()).unwrap();
        assert_eq!(grad, ParamGradient::default());
        let u = array![[0.5, -1.0], [2.0, 0.0], [1.0, 1.0]];
        let s = ParamSet::new(0.3, -0.7, 1.1, 0.2, -0.4, 0.9, 0.5);
        let grad = param_gradient(&g, s, &h, &u, eps()).unwrap();
        assert_eq!(grad.d_m3, (&u * &h).sum());
    }

    #[test]
    fn param_gradient_matches_central_differences() {
        let mut rng = seeded(3);
        let step = 1e-5;
        for t in 0..20 {
            let n = rng.random_range(3..10);
            let g = random_connected_graph(n, 0.3, 200 + t).unwrap();
            let mut s = random_params(&mut rng, -1.0, 1.0);
            s.a = rng.random_range(0.0..1.0); // keep d_i + a > 0
            let h = random_matrix(&mut rng, n, 2);
            let u = random_matrix(&mut rng, n, 2);
            let loss = |p: ParamSet| (&apply(&g, p, &h, eps()).unwrap() * &u).sum();
            let grad = param_gradient(&g, s, &h, &u, eps()).unwrap().to_array();
            for k in 0..7 {
                let mut plus = s.to_array();
                let mut minus = s.to_array();
                plus[k] += step;
                minus[k] -= step;
                let fd = (loss(ParamSet::from_array(plus)) - loss(ParamSet::from_array(minus))) / (2.0 * step);
                let rel = (grad[k] - fd).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
                assert!(rel <= 1e-4, "instance {t} param {}: analytic {} fd {}", ParamSet::NAMES[k], grad[k], fd);
            }
        }
    }

    #[test]
    fn clamp_is_flat_for_a_through_base() {
        // isolated node 2 with a < 0 is clamped; its base no longer depends on a
        let g = AttributedGraph::from_edges(3, [(0, 1)]).unwrap();
        let s = ParamSet::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.5);
        let op = PreparedOperator::new(&g, s, eps());
        assert_eq!(op.clamp_count(), 1);
        assert_eq!(op.augmented_degrees()[2], 1e-6);
        let h = array![[0.0], [0.0], [1.0]];
        let grad = op.param_gradient(&h, &h).unwrap();
        assert_eq!(grad.d_a, 0.0);
    }

    #[test]
    fn gso_pattern() {
        let g = p3();
        for p in Preset::ALL {
            assert!(is_gso(&build_operator(&g, p.params(), eps()).matrix, &g));
        }
        assert!(!is_gso(&CsrMatrix::from_dense(&Array2::ones((3, 3))), &g));
        assert!(is_gso(&CsrMatrix::from_dense(&Array2::zeros((3, 3))), &g));
    }

    #[test]
    fn symmetric_when_exponents_match() {
        let mut rng = seeded(4);
        for t in 0..10 {
            let g = random_connected_graph(12, 0.3, 300 + t).unwrap();
            let mut s = random_params(&mut rng, -1.0, 1.0);
            s.e3 = s.e2;
            let m = build_operator(&g, s, eps()).to_dense();
            assert_eq!(m, m.t());
        }
    }

    #[test]
    fn linear_in_m1() {
        let g = random_connected_graph(15, 0.2, 9).unwrap();
        let s = ParamSet::new(0.7, 0.4, -0.3, 0.6, -0.5, -0.1, 0.8);
        let mut s2 = s;
        s2.m1 *= 2.0;
        let diff = build_operator(&g, s2, eps()).to_dense() - build_operator(&g, s, eps()).to_dense();
        let op = PreparedOperator::new(&g, s, eps());
        let expected = Array2::from_diag(&ndarray::Array1::from_iter(
            op.augmented_degrees().iter().map(|b| s.m1 * b.powf(s.e1)),
        ));
        assert!(max_abs_diff(&diff, &expected) < 1e-14);
    }
}
