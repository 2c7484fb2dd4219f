//! Compressed sparse row storage for the graph adjacency.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// CSR matrix of `f64`. Column indices are strictly increasing within each
/// row and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets in any order. Zero values are
    /// dropped; a repeated `(row, col)` is an error.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= n_rows {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: r,
                    limit: n_rows,
                });
            }
            if c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: c,
                    limit: n_cols,
                });
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = triplets
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::DuplicateEdge {
                row: w[0].0,
                col: w[0].1,
            });
        }

        let mut offsets = vec![0; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if v == 0.0 {
                continue;
            }
            offsets[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let triplets = dense
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((r, c), &v)| (r, c, v))
            .collect();
        Self::from_triplets(dense.nrows(), dense.ncols(), triplets)
            .expect("dense indices are unique and in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `(column, value)` pairs of one row in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.offsets[r]..self.offsets[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && self
                .iter()
                .all(|(r, c, v)| self.get(c, r).to_bits() == v.to_bits())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    /// Same sparsity pattern with every value mapped through `f(row, col, v)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }

    /// `self · dense`. Each output row accumulates in column order, so the
    /// result does not depend on scheduling.
    pub fn mul_dense(&self, dense: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "sparse-dense product",
                expected: format!("{} rows", self.n_cols),
                found: format!("{} rows", dense.nrows()),
            });
        }
        let mut out = Array2::zeros((self.n_rows, dense.ncols()));
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &dense.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense` without materializing the transpose.
    pub fn transpose_mul_dense(&self, dense: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.n_rows {
            return Err(Error::DimensionMismatch {
                context: "transposed sparse-dense product",
                expected: format!("{} rows", self.n_rows),
                found: format!("{} rows", dense.nrows()),
            });
        }
        let mut out = Array2::zeros((self.n_cols, dense.ncols()));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &dense.row(r));
            }
        }
        Ok(out)
    }
}
