use alloc::vec;
use alloc::vec::Vec;

/// Unsorted `(row, col, value)` accumulator; duplicates are summed on compression.
#[derive(Debug, Clone, Default)]
pub struct TripletBuffer {
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        TripletBuffer {
            entries: Vec::with_capacity(n),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: TripletBuffer) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Sorts and sums the triplets and drops entries that sum to exactly zero,
    /// so the result does not depend on insertion order.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: TripletBuffer, symmetric: bool) -> Self {
        let mut entries = triplets.entries;
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, _) = entries[i];
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) outside {n_rows}x{n_cols}");
            let mut sum = 0.0;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                sum += entries[i].2;
                i += 1;
            }
            if sum != 0.0 {
                col_idx.push(c);
                values.push(sum);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_triplets(n_rows, n_cols, TripletBuffer::new(), n_rows == n_cols)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuffer::with_capacity(n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        Self::from_triplets(n, n, t, true)
    }

    /// Assemble a matrix from scaled blocks placed at `(row_offset, col_offset)`.
    pub fn from_blocks(
        n_rows: usize,
        n_cols: usize,
        blocks: &[(usize, usize, &SparseOperator, f64)],
        symmetric: bool,
    ) -> Self {
        let mut t = TripletBuffer::with_capacity(blocks.iter().map(|b| b.2.nnz()).sum());
        for &(ro, co, op, scale) in blocks {
            for (r, c, v) in op.iter() {
                t.push(ro + r, co + c, scale * v);
            }
        }
        Self::from_triplets(n_rows, n_cols, t, symmetric)
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

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        for (r, yr) in y.iter_mut().enumerate().take(self.n_rows) {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (r, c, v) in self.iter() {
            y[c] += v * x[r];
        }
        y
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.n_rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                y[r] * cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
            })
            .sum()
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut t = TripletBuffer::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        Self::from_triplets(self.n_cols, self.n_rows, t, self.symmetric)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_summed_and_zeros_dropped() {
        let mut t = TripletBuffer::new();
        t.push(1, 0, 2.0);
        t.push(0, 1, 1.0);
        t.push(0, 1, -1.0);
        t.push(1, 0, 0.5);
        t.push(0, 0, 3.0);
        let a = SparseOperator::from_triplets(2, 2, t, false);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 2.5]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 1.0]), vec![5.5, 0.0]);
        assert_eq!(a.transpose().get(0, 1), 2.5);
    }

    #[test]
    fn blocks_are_placed_with_offsets() {
        let i2 = SparseOperator::identity(2);
        let a = SparseOperator::from_blocks(3, 3, &[(0, 0, &i2, 2.0), (1, 1, &i2, 1.0)], true);
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }
}
