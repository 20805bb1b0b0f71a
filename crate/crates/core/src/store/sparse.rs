//! Sparse score vectors and CSR similarity matrices.
//!
//! Both containers only ever hold finite, strictly positive values: a zero
//! score is represented by absence.

use crate::error::{Error, Result};

/// Sparse non-negative scores of one query against `dim` documents.
///
/// Entries are kept sorted by document index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

fn check_value(v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidScores(format!("non-finite value {v}")));
    }
    if v < 0.0 {
        return Err(Error::InvalidScores(format!("negative value {v}")));
    }
    Ok(())
}

impl ScoreVector {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from `(index, score)` pairs in any order.
    ///
    /// Exact zeros are dropped; negative, non-finite, out-of-range or
    /// repeated indices are rejected.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (i, v) in entries {
            check_value(v)?;
            if i >= dim {
                return Err(Error::UnknownDocIndex(i));
            }
            if v > 0.0 {
                out.push((i, v));
            }
        }
        out.sort_by_key(|&(i, _)| i);
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidScores("repeated index".into()));
        }
        Ok(Self { dim, entries: out })
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_entries(values.len(), values.iter().copied().enumerate())
    }

    /// Internal constructor for already-sorted, already-positive entries.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(i, v)| i < dim && v > 0.0 && v.is_finite()));
        Self { dim, entries }
    }

    /// Drops zeros from a dense buffer without re-validating.
    pub(crate) fn from_dense_nonneg(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self::from_sorted_unchecked(values.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.entries.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale factor {c} must be positive")));
        }
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * c)).collect(),
        })
    }
}

/// Square sparse non-negative matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SimMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![1.0; dim],
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are an
    /// error; zeros are dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            check_value(v)?;
            if r >= dim {
                return Err(Error::UnknownDocIndex(r));
            }
            if c >= dim {
                return Err(Error::UnknownDocIndex(c));
            }
            t.push((r, c, v));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = t.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidScores(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals = Vec::with_capacity(t.len());
        for &(r, c, v) in &t {
            if v > 0.0 {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Stacks one score vector per row. Every row must have dimension `rows.len()`.
    pub fn from_rows(rows: Vec<ScoreVector>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            if row.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.dim(),
                });
            }
            for (c, v) in row.entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut t = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            t.extend(row.iter().enumerate().map(|(c, &v)| (r, c, v)));
        }
        Self::from_triplets(dim, t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `r`, sorted by column.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn row_vector(&self, r: usize) -> ScoreVector {
        let (c, v) = self.row(r);
        ScoreVector::from_sorted_unchecked(self.dim, c.iter().copied().zip(v.iter().copied()).collect())
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v.iter()).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// Applies `f` to every row's value slice, keeping the sparsity pattern.
    /// Entries mapped to zero are removed.
    pub(crate) fn map_rows(&self, mut f: impl FnMut(usize, &[usize], &[f64]) -> Vec<f64>) -> Self {
        let mut rows = Vec::with_capacity(self.dim);
        for r in 0..self.dim {
            let (c, v) = self.row(r);
            let nv = f(r, c, v);
            let entries = c
                .iter()
                .zip(nv)
                .filter(|(_, v)| *v > 0.0)
                .map(|(&c, v)| (c, v))
                .collect();
            rows.push(ScoreVector::from_sorted_unchecked(self.dim, entries));
        }
        Self::from_rows(rows).expect("rows share the matrix dimension")
    }

    /// Dense row-vector times matrix product `x · M`, accumulated row by row
    /// in ascending row order.
    pub fn left_mul_dense(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector/matrix dimension mismatch");
        let mut y = vec![0.0; self.dim];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += xr * v;
            }
        }
        y
    }
}
