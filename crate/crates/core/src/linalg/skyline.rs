use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{norm2, ordering, SparseOperator};
use crate::{Error, Result};

/// `P A Pᵀ = L D Lᵀ` with unit lower `L` stored by rows over the envelope.
/// No pivoting is performed, so the ordering must keep every leading principal
/// submatrix nonsingular (true for any ordering of a quasi-definite matrix and
/// for [`ordering::saddle_ordering`] of a saddle matrix with full-rank coupling).
#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl LdlFactor {
    pub fn factor(a: &SparseOperator, perm: Vec<usize>) -> Result<Self> {
        let n = a.n_rows();
        assert_eq!(a.n_cols(), n);
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0usize; n];
        for (p, &v) in perm.iter().enumerate() {
            iperm[v] = p;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (r, c, _) in a.iter() {
            let (pr, pc) = (iperm[r], iperm[c]);
            let (hi, lo) = if pr >= pc { (pr, pc) } else { (pc, pr) };
            first[hi] = first[hi].min(lo);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (r, c, v) in a.iter() {
            let (pr, pc) = (iperm[r], iperm[c]);
            if pr == pc {
                diag[pr] = v;
            } else if pr > pc {
                lower[start[pr] + pc - first[pr]] = v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j] + (j - fj)];
                let s: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..j - fj])
                    .map(|(g, l)| g * l)
                    .sum();
                row_i[j - fi] -= s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let g = row_i[j - fi];
                let l = g / diag[j];
                row_i[j - fi] = l;
                d -= g * l;
            }
            if !d.is_finite() || d.abs() <= 1e-15 * scale {
                return Err(Error::SingularSystem { row: perm[i] });
            }
            diag[i] = d;
        }
        Ok(LdlFactor {
            perm,
            first,
            start,
            lower,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of stored off-diagonal envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    /// Counts of positive and negative pivots.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.diag.iter().filter(|d| **d > 0.0).count();
        (pos, self.diag.len() - pos)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&v| b[v]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (p, &v) in self.perm.iter().enumerate() {
            x[v] = y[p];
        }
        x
    }
}

/// Factorized symmetric system with iterative refinement to a relative
/// residual tolerance.
#[derive(Debug, Clone)]
pub struct SymmetricSolver {
    matrix: SparseOperator,
    factor: LdlFactor,
    tolerance: f64,
}

impl SymmetricSolver {
    /// `n_primary` is the size of the leading definite block; pass the full
    /// dimension for a definite or quasi-definite matrix.
    pub fn new(matrix: SparseOperator, n_primary: usize) -> Result<Self> {
        let perm = ordering::saddle_ordering(&matrix, n_primary);
        let factor = LdlFactor::factor(&matrix, perm)?;
        Ok(SymmetricSolver {
            matrix,
            factor,
            tolerance: 1e-10,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn factor(&self) -> &LdlFactor {
        &self.factor
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Solve `A x = b`; returns the solution and its relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let nb = norm2(b);
        if nb == 0.0 {
            return Ok((vec![0.0; b.len()], 0.0));
        }
        let mut x = self.factor.solve(b);
        let mut rel = self.relative_residual(&x, b, nb);
        for _ in 0..6 {
            if rel <= 1e-3 * self.tolerance {
                break;
            }
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.factor.solve(&r);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let new_rel = self.relative_residual(&candidate, b, nb);
            if new_rel >= rel {
                break;
            }
            x = candidate;
            rel = new_rel;
        }
        if !(rel <= self.tolerance) {
            return Err(Error::ToleranceNotMet {
                residual: rel,
                tolerance: self.tolerance,
            });
        }
        Ok((x, rel))
    }

    fn relative_residual(&self, x: &[f64], b: &[f64], nb: f64) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum();
        r.sqrt() / nb
    }
}
