//! Compressed-sparse-column storage and the matrix kernels used by every
//! other part of the solver.
//!
//! Symmetric matrices (the cost `P`, KKT matrices) are always stored as their
//! upper triangle; the `symmetric_upper` flavours of the kernels reconstruct the
//! implied lower half on the fly.

use thiserror::Error;

/// Bound magnitude at or above which a value is treated as infinite.
pub const INFINITY_THRESHOLD: f64 = 1e30;

/// Maps any value with `|v| >= 1e30` to the matching IEEE infinity.
pub fn normalize_bound(v: f64) -> f64 {
    if v >= INFINITY_THRESHOLD {
        f64::INFINITY
    } else if v <= -INFINITY_THRESHOLD {
        f64::NEG_INFINITY
    } else {
        v
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("triplet lists have different lengths ({rows}, {cols}, {vals})")]
    LengthMismatch { rows: usize, cols: usize, vals: usize },
    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed CSC structure: {0}")]
    Malformed(String),
    #[error("matrix is not symmetric: ({row}, {col}) = {upper} but ({col}, {row}) = {lower}")]
    NotSymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
}

/// Compressed-sparse-column matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from raw CSC arrays, checking every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if colptr.len() != ncols + 1 {
            return Err(SparseError::Malformed(format!(
                "colptr has length {}, expected {}",
                colptr.len(),
                ncols + 1
            )));
        }
        if colptr[0] != 0 {
            return Err(SparseError::Malformed("colptr[0] must be 0".into()));
        }
        if rowind.len() != values.len() || colptr[ncols] != rowind.len() {
            return Err(SparseError::Malformed(format!(
                "colptr[ncols] = {}, rowind has {}, values has {}",
                colptr[ncols],
                rowind.len(),
                values.len()
            )));
        }
        for j in 0..ncols {
            if colptr[j + 1] < colptr[j] {
                return Err(SparseError::Malformed(format!(
                    "colptr decreases at column {j}"
                )));
            }
            let col = &rowind[colptr[j]..colptr[j + 1]];
            for (k, &r) in col.iter().enumerate() {
                if r >= nrows {
                    return Err(SparseError::IndexOutOfRange {
                        row: r,
                        col: j,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && col[k - 1] >= r {
                    return Err(SparseError::Malformed(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(colptr.len(), ncols + 1);
        debug_assert_eq!(rowind.len(), values.len());
        Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; ncols + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    /// Diagonal matrix; zero entries are still stored explicitly.
    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), d.to_vec())
    }

    /// Canonical CSC from coordinate triplets. Duplicates are summed when
    /// `sum_duplicates` is set and rejected otherwise.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        rows: &[usize],
        cols: &[usize],
        vals: &[f64],
        sum_duplicates: bool,
    ) -> Result<Self, SparseError> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(SparseError::LengthMismatch {
                rows: rows.len(),
                cols: cols.len(),
                vals: vals.len(),
            });
        }
        for (&r, &c) in rows.iter().zip(cols) {
            if r >= nrows || c >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&k| (cols[k], rows[k]));

        let mut colptr = vec![0usize; ncols + 1];
        let mut rowind = Vec::with_capacity(rows.len());
        let mut values: Vec<f64> = Vec::with_capacity(rows.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let key = (cols[k], rows[k]);
            if last == Some(key) {
                if !sum_duplicates {
                    return Err(SparseError::DuplicateEntry {
                        row: key.1,
                        col: key.0,
                    });
                }
                *values.last_mut().unwrap() += vals[k];
                continue;
            }
            last = Some(key);
            rowind.push(rows[k]);
            values.push(vals[k]);
            colptr[cols[k] + 1] += 1;
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, colptr, rowind, values))
    }

    /// Builds a matrix from a row-major dense array, dropping exact zeros.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), nrows * ncols, "dense data has wrong length");
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = data[i * ncols + j];
                if v != 0.0 {
                    rowind.push(i);
                    values.push(v);
                }
            }
            colptr.push(rowind.len());
        }
        Self::from_parts_unchecked(nrows, ncols, colptr, rowind, values)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            out[i * self.ncols + j] += v;
        }
        out
    }

    pub fn to_triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                rows.push(self.rowind[p]);
                cols.push(j);
            }
        }
        (rows, cols, self.values.clone())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates over `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowind[p], j, self.values[p]))
        })
    }

    /// Value at `(row, col)` or zero when not stored.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.colptr[col]..self.colptr[col + 1];
        match self.rowind[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// True iff every stored entry lies on or above the diagonal.
    pub fn is_upper_triangular(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(i, j, _)| i <= j)
    }

    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowind == other.rowind
    }

    /// Folds a square matrix to its upper triangle. Input that is already
    /// upper triangular passes through; a full symmetric input must have
    /// matching mirrored entries.
    pub fn to_upper_triangular(&self) -> Result<CscMatrix, SparseError> {
        if self.nrows != self.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if self.is_upper_triangular() {
            return Ok(self.clone());
        }
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for (i, j, v) in self.iter() {
            if i > j {
                let mirrored = self.get(j, i);
                if mirrored != v {
                    return Err(SparseError::NotSymmetric {
                        row: j,
                        col: i,
                        upper: mirrored,
                        lower: v,
                    });
                }
            } else {
                if i < j && self.get(j, i) != v {
                    return Err(SparseError::NotSymmetric {
                        row: i,
                        col: j,
                        upper: v,
                        lower: self.get(j, i),
                    });
                }
                rows.push(i);
                cols.push(j);
                vals.push(v);
            }
        }
        CscMatrix::from_triplets(self.nrows, self.ncols, &rows, &cols, &vals, false)
    }

    /// `y = M x` (or `M^T x`), overwriting `y`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        if transpose {
            debug_assert_eq!(x.len(), self.nrows);
            debug_assert_eq!(y.len(), self.ncols);
            for j in 0..self.ncols {
                let mut acc = 0.0;
                for p in self.colptr[j]..self.colptr[j + 1] {
                    acc += self.values[p] * x[self.rowind[p]];
                }
                y[j] = acc;
            }
        } else {
            debug_assert_eq!(x.len(), self.ncols);
            debug_assert_eq!(y.len(), self.nrows);
            y.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..self.ncols {
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in self.colptr[j]..self.colptr[j + 1] {
                    y[self.rowind[p]] += self.values[p] * xj;
                }
            }
        }
    }

    /// `y = M x` for a symmetric matrix stored as its upper triangle.
    pub fn sym_upper_mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(self.nrows, self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowind[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    /// Per-column infinity norm; in `symmetric_upper` mode the norm of the
    /// full column implied by the stored upper triangle.
    pub fn col_inf_norms(&self, symmetric_upper: bool) -> Vec<f64> {
        let mut norms = vec![0.0f64; self.ncols];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let a = self.values[p].abs();
                norms[j] = norms[j].max(a);
                if symmetric_upper {
                    let i = self.rowind[p];
                    norms[i] = norms[i].max(a);
                }
            }
        }
        norms
    }

    /// Per-row infinity norm (column norms of the transpose).
    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut norms = vec![0.0f64; self.nrows];
        for (i, _, v) in self.iter() {
            norms[i] = norms[i].max(v.abs());
        }
        norms
    }

    /// In-place `M <- diag(left) * M * diag(right)`.
    pub fn scale_rows_cols(&mut self, left: &[f64], right: &[f64]) {
        debug_assert_eq!(left.len(), self.nrows);
        debug_assert_eq!(right.len(), self.ncols);
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.values[p] *= left[self.rowind[p]] * right[j];
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CscMatrix {
        let mut newpos = vec![usize::MAX; self.nrows];
        for (k, &r) in rows.iter().enumerate() {
            newpos[r] = k;
        }
        let (mut ri, mut ci, mut vi) = (Vec::new(), Vec::new(), Vec::new());
        for (i, j, v) in self.iter() {
            if newpos[i] != usize::MAX {
                ri.push(newpos[i]);
                ci.push(j);
                vi.push(v);
            }
        }
        CscMatrix::from_triplets(rows.len(), self.ncols, &ri, &ci, &vi, false)
            .expect("row selection of a canonical matrix is canonical")
    }
}

/// Matrix-vector product kernel.
///
/// Computes `M x`, `M^T x`, or, when `symmetric_upper` is set, the product
/// with the symmetric matrix whose upper triangle is stored in `m`.
pub fn spmv(
    m: &CscMatrix,
    x: &[f64],
    transpose: bool,
    symmetric_upper: bool,
) -> Result<Vec<f64>, SparseError> {
    if symmetric_upper {
        if !m.is_upper_triangular() {
            return Err(SparseError::DimensionMismatch(
                "symmetric_upper requires square upper-triangular storage".into(),
            ));
        }
        if x.len() != m.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "vector has length {}, matrix is {}x{}",
                x.len(),
                m.nrows,
                m.ncols
            )));
        }
        let mut y = vec![0.0; m.nrows];
        m.sym_upper_mul_vec_into(x, &mut y);
        return Ok(y);
    }
    let (inner, outer) = if transpose {
        (m.nrows, m.ncols)
    } else {
        (m.ncols, m.nrows)
    };
    if x.len() != inner {
        return Err(SparseError::DimensionMismatch(format!(
            "vector has length {}, expected {inner}",
            x.len()
        )));
    }
    let mut y = vec![0.0; outer];
    m.mul_vec_into(x, &mut y, transpose);
    Ok(y)
}

/// Per-column infinity norms; see [`CscMatrix::col_inf_norms`].
pub fn inf_norm_columns(m: &CscMatrix, symmetric_upper: bool) -> Vec<f64> {
    m.col_inf_norms(symmetric_upper)
}
