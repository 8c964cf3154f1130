use super::{OperatorError, Result};
use ndarray::Array2;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw parts. Column indices within a row must be strictly
    /// increasing.
    pub fn from_parts(rows: usize, cols: usize, indptr: Vec<usize>, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indptr.len() != rows + 1 || indices.len() != values.len() || indptr[rows] != indices.len() {
            return Err(OperatorError::Dimension("inconsistent CSR buffers".into()));
        }
        for r in 0..rows {
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.last().is_some_and(|&c| c >= cols) {
                return Err(OperatorError::Dimension(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self { rows, cols, indptr, indices, values })
    }

    /// Keeps exact nonzeros of a dense matrix.
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let (rows, cols) = m.dim();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = m[[r, c]];
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { rows, cols, indptr, indices, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs stored in row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }

    /// Sparse-dense product `self * h`.
    pub fn matmul(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        if h.nrows() != self.cols {
            return Err(OperatorError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                h.nrows(),
                h.ncols()
            )));
        }
        let mut out = Array2::zeros((self.rows, h.ncols()));
        crate::par::for_each_row_mut(&mut out, |r, mut row| {
            for (c, v) in self.row(r) {
                row.scaled_add(v, &h.row(c));
            }
        });
        Ok(out)
    }
}
