use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex sparse matrix in compressed-row layout.
///
/// Duplicate `(row, col)` entries supplied at construction are summed; exact
/// zeros produced by the merge are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut entries: Vec<(usize, usize, Complex64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= dim || c >= dim {
                return Err(Error::InvalidParameter(format!(
                    "sparse entry ({r}, {c}) outside a {dim}x{dim} operator"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }

        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != Complex64::new(0.0, 0.0) {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { dim, row_ptr, cols: keep_cols, vals: keep_vals })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal indices are always in range")
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    /// `y += alpha A x`.
    pub fn apply_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr += alpha * acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
            .expect("transposed indices stay in range")
    }

    /// Linear combination `Σ coeff_k A_k` of operators sharing one dimension.
    pub fn linear_combination(terms: &[(Complex64, &SparseOperator)]) -> Result<Self> {
        let dim = terms.first().map(|(_, op)| op.dim).unwrap_or(0);
        for (_, op) in terms {
            if op.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: op.dim });
            }
        }
        Self::from_triplets(
            dim,
            terms.iter().flat_map(|(c, op)| op.triplets().map(move |(r, col, v)| (r, col, c * v))),
        )
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// `max |A - A†|` over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral norm of a Hermitian operator.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].norm()).sum())
            .fold(0.0, f64::max)
    }
}
