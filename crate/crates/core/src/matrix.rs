//! Dense and sparse matrix containers.
//!
//! [`DenseMatrix`] holds signals, dictionaries and residuals. Coefficients
//! live in [`SparseCoeffMatrix`], stored per column because sparse coding
//! walks the matrix column by column; row views are materialised on demand
//! for the atom updates.

use crate::error::{Error, Result};
use crate::linalg;

/// Real `rows x cols` matrix, row-major, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has length {}, expected {rows}",
                    c.len()
                )));
            }
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + col])
            .collect()
    }

    pub fn column_into(&self, col: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * self.cols + col];
        }
    }

    pub fn set_column(&mut self, col: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            debug_assert!(v.is_finite());
            self.data[i * self.cols + col] = *v;
        }
    }

    /// `self[:, col] += alpha * x`
    pub fn add_to_column(&mut self, col: usize, alpha: f64, x: &[f64]) {
        for (i, v) in x.iter().enumerate() {
            self.data[i * self.cols + col] += alpha * v;
        }
    }

    pub fn column_norm_sq(&self, col: usize) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + col].powi(2))
            .sum()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v * v;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    linalg::axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    /// `self^T * v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                linalg::axpy(*vi, self.row(i), &mut out);
            }
        }
        out
    }

    /// `self * v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| linalg::dot(self.row(i), v))
            .collect()
    }

    /// `self * A` for a sparse coefficient matrix.
    pub fn mul_sparse(&self, a: &SparseCoeffMatrix) -> Result<DenseMatrix> {
        if self.cols != a.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times sparse {}x{}",
                self.rows,
                self.cols,
                a.rows(),
                a.cols()
            )));
        }
        let n = a.cols();
        let mut out = DenseMatrix::zeros(self.rows, n);
        for j in 0..n {
            for &(k, v) in a.column(j) {
                for i in 0..self.rows {
                    out.data[i * n + j] += self.data[i * self.cols + k] * v;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} minus {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        linalg::norm_sq(&self.data)
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))
    }
}

/// Sum of squared entries.
pub fn frobenius_norm_sq(m: &DenseMatrix) -> f64 {
    m.frobenius_norm_sq()
}

/// Norms below this are treated as zero columns.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

/// Scales every column to unit l2 norm.
pub fn normalize_columns(m: &DenseMatrix) -> Result<DenseMatrix> {
    let norms = m.column_norms();
    if let Some(j) = norms.iter().position(|n| *n < ZERO_COLUMN_TOL) {
        return Err(Error::ZeroColumn(j));
    }
    Ok(DenseMatrix::from_fn(m.rows, m.cols, |i, j| {
        m.get(i, j) / norms[j]
    }))
}

/// Sparse vector with strictly increasing indices and nonzero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(index, value)` pairs in any order. Zero values are
    /// dropped; duplicate or out-of-range indices are rejected.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::InvalidEntry(format!(
                    "index {i} out of range for dim {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidEntry(format!("non-finite value at {i}")));
            }
            if indices.last() == Some(&i) {
                return Err(Error::InvalidEntry(format!("duplicate index {i}")));
            }
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(Self {
            dim,
            indices,
            values,
        })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let mut out = Self::empty(values.len());
        for (i, v) in values.iter().enumerate() {
            if *v != 0.0 {
                out.indices.push(i);
                out.values.push(*v);
            }
        }
        out
    }

    pub fn indicator(dim: usize, index: usize, value: f64) -> Self {
        assert!(index < dim);
        if value == 0.0 {
            return Self::empty(dim);
        }
        Self {
            dim,
            indices: vec![index],
            values: vec![value],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.values)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::empty(self.dim);
        }
        Self {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }
}

/// `m x n` coefficient matrix with at most `budget` stored nonzeros.
///
/// Entries are bucketed per column, each bucket sorted by row index and
/// free of zeros and duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffMatrix {
    rows: usize,
    cols: usize,
    budget: usize,
    columns: Vec<Vec<(usize, f64)>>,
    nnz: usize,
}

impl SparseCoeffMatrix {
    pub fn empty(rows: usize, cols: usize, budget: usize) -> Self {
        Self {
            rows,
            cols,
            budget,
            columns: vec![Vec::new(); cols],
            nnz: 0,
        }
    }

    /// Builds from `(row, col, value)` triplets. Zero values are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        budget: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidEntry(format!(
                    "({r}, {c}) out of range for {rows}x{cols}"
                )));
            }
            buckets[c].push((r, v));
        }
        let mut out = Self::empty(rows, cols, budget);
        for (c, bucket) in buckets.into_iter().enumerate() {
            let col = SparseVector::from_pairs(rows, bucket)
                .map_err(|e| Error::InvalidEntry(format!("column {c}: {e}")))?;
            out.columns[c] = col.iter().collect();
            out.nnz += col.nnz();
        }
        out.check_budget()?;
        Ok(out)
    }

    /// Builds from one sparse vector per column.
    pub fn from_columns(rows: usize, budget: usize, columns: Vec<SparseVector>) -> Result<Self> {
        let mut out = Self::empty(rows, columns.len(), budget);
        for (j, c) in columns.into_iter().enumerate() {
            if c.dim() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has dim {}, expected {rows}",
                    c.dim()
                )));
            }
            out.nnz += c.nnz();
            out.columns[j] = c.iter().collect();
        }
        out.check_budget()?;
        Ok(out)
    }

    /// Builds from one sparse vector per row (each of dimension `cols`).
    pub fn from_rows(cols: usize, budget: usize, rows: &[SparseVector]) -> Result<Self> {
        let mut out = Self::empty(rows.len(), cols, budget);
        for (i, r) in rows.iter().enumerate() {
            if r.dim() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has dim {}, expected {cols}",
                    r.dim()
                )));
            }
            for (j, v) in r.iter() {
                // rows are visited in increasing order, so buckets stay sorted
                out.columns[j].push((i, v));
            }
            out.nnz += r.nnz();
        }
        out.check_budget()?;
        Ok(out)
    }

    /// Sparsifies a dense `m x n` matrix (exact zeros are not stored).
    pub fn from_dense(m: &DenseMatrix, budget: usize) -> Result<Self> {
        let triplets = (0..m.rows())
            .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m.get(i, j)));
        Self::from_triplets(m.rows(), m.cols(), budget, triplets)
    }

    fn check_budget(&self) -> Result<()> {
        if self.nnz > self.budget {
            return Err(Error::BudgetExceeded {
                nnz: self.nnz,
                budget: self.budget,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn budget(&self) -> usize {
        self.budget
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Entries `(row, value)` of column `j`, sorted by row.
    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn column_vector(&self, j: usize) -> SparseVector {
        let (idx, vals): (Vec<_>, Vec<_>) = self.columns[j].iter().copied().unzip();
        SparseVector {
            dim: self.rows,
            indices: idx,
            values: vals,
        }
    }

    /// Replaces column `j`; fails if the global budget would be exceeded.
    pub fn set_column(&mut self, j: usize, col: &SparseVector) -> Result<()> {
        if col.dim() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "column has dim {}, expected {}",
                col.dim(),
                self.rows
            )));
        }
        let nnz = self.nnz - self.columns[j].len() + col.nnz();
        if nnz > self.budget {
            return Err(Error::BudgetExceeded {
                nnz,
                budget: self.budget,
            });
        }
        self.columns[j] = col.iter().collect();
        self.nnz = nnz;
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col]
            .binary_search_by_key(&row, |e| e.0)
            .map(|p| self.columns[col][p].1)
            .unwrap_or(0.0)
    }

    /// All entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |&(i, v)| (i, j, v)))
    }

    /// Row vectors, each of dimension `cols`.
    pub fn row_vectors(&self) -> Vec<SparseVector> {
        let mut rows: Vec<SparseVector> = (0..self.rows)
            .map(|_| SparseVector::empty(self.cols))
            .collect();
        for (i, j, v) in self.triplets() {
            rows[i].indices.push(j);
            rows[i].values.push(v);
        }
        rows
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    pub fn nnz_per_column(&self) -> Vec<usize> {
        self.columns.iter().map(Vec::len).collect()
    }

    pub fn nnz_per_row(&self) -> Vec<usize> {
        let mut counts = vec![0; self.rows];
        for (i, _, _) in self.triplets() {
            counts[i] += 1;
        }
        counts
    }

    /// Multiplies every entry of row `i` by `scales[i]`.
    pub fn scale_rows(&mut self, scales: &[f64]) {
        assert_eq!(scales.len(), self.rows);
        for c in &mut self.columns {
            for e in c.iter_mut() {
                e.1 *= scales[e.0];
            }
            c.retain(|e| e.1 != 0.0);
        }
        self.nnz = self.columns.iter().map(Vec::len).sum();
    }
}

/// Nonzero count of each column of `a`.
pub fn coeff_nnz_per_column(a: &SparseCoeffMatrix) -> Vec<usize> {
    a.nnz_per_column()
}

/// Nonzero count of each row of `a`.
pub fn coeff_nnz_per_row(a: &SparseCoeffMatrix) -> Vec<usize> {
    a.nnz_per_row()
}
