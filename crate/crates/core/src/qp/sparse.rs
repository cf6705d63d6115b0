//! Row-major sparse matrix used to describe QP data.

use serde::{Deserialize, Serialize};

/// Row-major sparse matrix. Each row holds `(column, value)` pairs sorted by
/// column with no duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    /// Builds a matrix from a dense row-major slice, dropping exact zeros.
    pub fn from_dense(nrows: usize, ncols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), nrows * ncols, "dense buffer has wrong length");
        let mut m = Self::zeros(nrows, ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                let v = values[r * ncols + c];
                if v != 0.0 {
                    m.rows[r].push((c, v));
                }
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.rows[i].push((i, 1.0));
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Appends an empty row and returns its index.
    pub fn push_row(&mut self) -> usize {
        self.rows.push(Vec::new());
        self.rows.len() - 1
    }

    /// Adds `value` to entry `(row, col)`.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(col < self.ncols, "column {col} out of range {}", self.ncols);
        if value == 0.0 {
            return;
        }
        let entries = &mut self.rows[row];
        match entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => entries[pos].1 += value,
            Err(pos) => entries.insert(pos, (col, value)),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let entries = &self.rows[row];
        entries
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|pos| entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.rows[row]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = selfᵀ * x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows.len());
        let mut y = vec![0.0; self.ncols];
        for (row, &xi) in self.rows.iter().zip(x) {
            if xi == 0.0 {
                continue;
            }
            for &(c, v) in row {
                y[c] += v * xi;
            }
        }
        y
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.is_finite())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows() * self.ncols];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[r * self.ncols + c] = v;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_accumulates_and_keeps_order() {
        let mut m = SparseMatrix::zeros(1, 4);
        m.add(0, 3, 1.0);
        m.add(0, 1, 2.0);
        m.add(0, 3, 0.5);
        assert_eq!(m.row(0), &[(1, 2.0), (3, 1.5)]);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let m = SparseMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 3.0]);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![7.0, 7.0]);
        assert_eq!(m.tr_mul_vec(&[1.0, 1.0]), vec![1.0, -1.0, 5.0]);
        assert_eq!(m.nnz(), 4);
    }
}
