use crate::output::{Field, Table};
use crate::par;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    /// From per-row `(col, value)` lists; entries are sorted by column and
    /// duplicates summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()
    }

    /// `A v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        par::map_range(self.n_rows, |i| self.row(i).map(|(j, a)| a * v[j]).sum())
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.n_cols];
        for i in 0..self.n_rows {
            for (j, a) in self.row(i) {
                rows[j].push((i as u32, a));
            }
        }
        Self::from_rows(self.n_rows, rows)
    }

    /// Entries multiplied as `a_ij · f(i, j)`.
    pub fn map_entries<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[p] = f(i, self.cols[p] as usize, self.vals[p]);
            }
        }
        out
    }

    /// `max_i Σ_j |a_ij − b_ij|`.
    pub fn max_row_abs_diff(&self, other: &SparseMatrix) -> f64 {
        (0..self.n_rows)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = self.row(i).collect();
                row.extend(other.row(i).map(|(j, b)| (j, -b)));
                row.sort_by_key(|e| e.0);
                let mut total = 0.0;
                let mut k = 0;
                while k < row.len() {
                    let j = row[k].0;
                    let mut acc = 0.0;
                    while k < row.len() && row[k].0 == j {
                        acc += row[k].1;
                        k += 1;
                    }
                    total += acc.abs();
                }
                total
            })
            .fold(0.0, f64::max)
    }

    /// Elementwise sum of matrices with equal shape.
    pub fn sum<'a, I: IntoIterator<Item = &'a SparseMatrix>>(n_rows: usize, n_cols: usize, parts: I) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_rows];
        for m in parts {
            for (i, row) in rows.iter_mut().enumerate() {
                row.extend(m.row(i).map(|(j, a)| (j as u32, a)));
            }
        }
        Self::from_rows(n_cols, rows)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, a) in self.row(i) {
                d[(i, j)] += a;
            }
        }
        d
    }

    /// Columns `row, col, value`.
    pub fn triplets_table(&self) -> Table {
        let mut t = Table::new(["row", "col", "value"]);
        for i in 0..self.n_rows {
            for (j, a) in self.row(i) {
                t.push(vec![Field::from(i), Field::from(j), Field::Num(a)]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_merged() {
        let m = SparseMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 0.5), (2, 0.25)], vec![]]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 1.25);
        assert_eq!(m.row_sum(1), 0.0);
        assert_eq!(m.mul_vec(&[2.0, 0.0, 4.0]), vec![6.0, 0.0]);
        let t = m.transpose();
        assert_eq!(t.n_rows, 3);
        assert_eq!(t.get(2, 0), 1.25);
        assert_eq!(m.max_row_abs_diff(&m), 0.0);
    }
}
