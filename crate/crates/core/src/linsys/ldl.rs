//! Up-looking sparse LDLᵀ factorization without pivoting, for quasi-definite
//! matrices stored as upper triangles.

use crate::sparse::CscMatrix;

use super::{amd, LinsysError, Ordering};

/// Pivots with magnitude below this are reported as [`LinsysError::ZeroPivot`].
pub const ZERO_PIVOT_THRESHOLD: f64 = 1e-15;

const NO_PARENT: usize = usize::MAX;

/// Structure of `L` for a fixed sparsity pattern and ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicFactor {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub perm: Vec<usize>,
    /// Inverse of `perm`: `iperm[perm[k]] == k`.
    pub iperm: Vec<usize>,
    /// Parent of each column in the elimination tree, `None` for roots.
    pub etree: Vec<Option<usize>>,
    /// Number of strictly-lower nonzeros in each column of `L`.
    pub lcolcounts: Vec<usize>,
    // Pattern of the permuted upper triangle and the position of each
    // original entry inside it.
    c_colptr: Vec<usize>,
    c_rowind: Vec<usize>,
    c_map: Vec<usize>,
    // Pattern of the matrix the analysis was computed for.
    k_colptr: Vec<usize>,
    k_rowind: Vec<usize>,
}

impl SymbolicFactor {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Total number of strictly-lower nonzeros in `L`.
    pub fn nnz_l(&self) -> usize {
        self.lcolcounts.iter().sum()
    }

    /// Floating-point operation count of one numeric factorization, up to a
    /// constant factor.
    pub fn factor_work(&self) -> f64 {
        self.lcolcounts
            .iter()
            .map(|&c| (c as f64) * (c as f64) + c as f64)
            .sum::<f64>()
            + self.dim() as f64
    }

    /// Operation count of one triangular solve pair, up to a constant factor.
    pub fn solve_work(&self) -> f64 {
        2.0 * self.nnz_l() as f64 + 3.0 * self.dim() as f64
    }

    fn matches_pattern(&self, k: &CscMatrix) -> bool {
        k.colptr() == self.k_colptr.as_slice() && k.rowind() == self.k_rowind.as_slice()
    }
}

/// Values of `L` (unit diagonal implicit) and `D⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericFactor {
    pub l: CscMatrix,
    pub dinv: Vec<f64>,
}

impl NumericFactor {
    /// Numbers of positive and negative entries of `D`.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.dinv.iter().filter(|d| **d > 0.0).count();
        (pos, self.dinv.len() - pos)
    }
}

fn check_square_upper(k: &CscMatrix) -> Result<(), LinsysError> {
    if k.nrows() != k.ncols() {
        return Err(LinsysError::Dimension(format!(
            "matrix is {}x{}, expected square",
            k.nrows(),
            k.ncols()
        )));
    }
    if !k.is_upper_triangular() {
        return Err(LinsysError::Dimension("matrix must be stored upper triangular".into()));
    }
    Ok(())
}

/// Computes a fill-reducing ordering, the elimination tree, and the column
/// counts of `L`. Only the pattern of `k` is read.
pub fn symbolic_factor(k: &CscMatrix, ordering: Ordering) -> Result<SymbolicFactor, LinsysError> {
    check_square_upper(k)?;
    let dim = k.ncols();
    let perm = match ordering {
        Ordering::Natural => (0..dim).collect(),
        Ordering::Amd => amd::amd_order(k),
    };
    let mut iperm = vec![0; dim];
    for (pos, &orig) in perm.iter().enumerate() {
        iperm[orig] = pos;
    }

    // Permuted upper triangle C = P K P', tracking where each entry of K lands.
    let mut counts = vec![0usize; dim];
    for (r, c, _) in k.iter() {
        let (pr, pc) = (iperm[r], iperm[c]);
        counts[pr.max(pc)] += 1;
    }
    let mut c_colptr = vec![0usize; dim + 1];
    for j in 0..dim {
        c_colptr[j + 1] = c_colptr[j] + counts[j];
    }
    let mut next = c_colptr[..dim].to_vec();
    let mut staged: Vec<(usize, usize)> = vec![(0, 0); k.nnz()];
    for (idx, (r, c, _)) in k.iter().enumerate() {
        let (pr, pc) = (iperm[r], iperm[c]);
        let col = pr.max(pc);
        staged[next[col]] = (pr.min(pc), idx);
        next[col] += 1;
    }
    for j in 0..dim {
        staged[c_colptr[j]..c_colptr[j + 1]].sort_unstable();
    }
    let c_rowind: Vec<usize> = staged.iter().map(|&(r, _)| r).collect();
    let mut c_map = vec![0usize; k.nnz()];
    for (pos, &(_, idx)) in staged.iter().enumerate() {
        c_map[idx] = pos;
    }

    let mut etree = vec![NO_PARENT; dim];
    let mut lcolcounts = vec![0usize; dim];
    let mut mark = vec![NO_PARENT; dim];
    for j in 0..dim {
        mark[j] = j;
        for &row in &c_rowind[c_colptr[j]..c_colptr[j + 1]] {
            let mut i = row;
            while i < j && mark[i] != j {
                if etree[i] == NO_PARENT {
                    etree[i] = j;
                }
                lcolcounts[i] += 1;
                mark[i] = j;
                i = etree[i];
            }
        }
    }

    Ok(SymbolicFactor {
        perm,
        iperm,
        etree: etree.into_iter().map(|p| (p != NO_PARENT).then_some(p)).collect(),
        lcolcounts,
        c_colptr,
        c_rowind,
        c_map,
        k_colptr: k.colptr().to_vec(),
        k_rowind: k.rowind().to_vec(),
    })
}

/// Numeric LDLᵀ of the permuted matrix. `k` must have the pattern `sym` was
/// computed for.
pub fn numeric_factor(k: &CscMatrix, sym: &SymbolicFactor) -> Result<NumericFactor, LinsysError> {
    if !sym.matches_pattern(k) {
        return Err(LinsysError::PatternMismatch);
    }
    let dim = sym.dim();
    let mut c_values = vec![0.0; k.nnz()];
    for (idx, &v) in k.values().iter().enumerate() {
        c_values[sym.c_map[idx]] = v;
    }
    let (cp, ci, cx) = (&sym.c_colptr, &sym.c_rowind, &c_values);

    let mut lp = vec![0usize; dim + 1];
    for j in 0..dim {
        lp[j + 1] = lp[j] + sym.lcolcounts[j];
    }
    let nnz_l = lp[dim];
    let mut li = vec![0usize; nnz_l];
    let mut lx = vec![0.0; nnz_l];
    let mut dinv = vec![0.0; dim];
    let mut next_in_col = lp[..dim].to_vec();

    let mut y_vals = vec![0.0; dim];
    let mut y_used = vec![false; dim];
    let mut y_idx: Vec<usize> = Vec::with_capacity(dim);
    let mut stack: Vec<usize> = Vec::with_capacity(dim);

    for kcol in 0..dim {
        y_idx.clear();
        let mut d = 0.0;
        // Scatter column k of C above the diagonal and collect the reach of
        // its pattern in the elimination tree, in topological order.
        for pos in cp[kcol]..cp[kcol + 1] {
            let b = ci[pos];
            if b == kcol {
                d = cx[pos];
                continue;
            }
            y_vals[b] = cx[pos];
            if y_used[b] {
                continue;
            }
            y_used[b] = true;
            stack.clear();
            stack.push(b);
            let mut next = sym.etree[b];
            while let Some(nx) = next {
                if nx >= kcol || y_used[nx] {
                    break;
                }
                y_used[nx] = true;
                stack.push(nx);
                next = sym.etree[nx];
            }
            while let Some(v) = stack.pop() {
                y_idx.push(v);
            }
        }
        for &c in y_idx.iter().rev() {
            let yc = y_vals[c];
            let end = next_in_col[c];
            for j in lp[c]..end {
                y_vals[li[j]] -= lx[j] * yc;
            }
            let lkc = yc * dinv[c];
            li[end] = kcol;
            lx[end] = lkc;
            d -= yc * lkc;
            next_in_col[c] += 1;
            y_vals[c] = 0.0;
            y_used[c] = false;
        }
        if !(d.abs() >= ZERO_PIVOT_THRESHOLD) {
            return Err(LinsysError::ZeroPivot { index: kcol, value: d });
        }
        dinv[kcol] = 1.0 / d;
    }

    Ok(NumericFactor {
        l: CscMatrix::from_parts_unchecked(dim, dim, lp, li, lx),
        dinv,
    })
}

/// Solves `K t = rhs` in place using a factorization of `P K P'`.
pub fn kkt_solve_in_place(fac: &NumericFactor, sym: &SymbolicFactor, rhs: &mut [f64], work: &mut Vec<f64>) {
    let dim = sym.dim();
    work.clear();
    work.extend(sym.perm.iter().map(|&p| rhs[p]));
    let (lp, li, lx) = (fac.l.colptr(), fac.l.rowind(), fac.l.values());
    for i in 0..dim {
        let xi = work[i];
        for j in lp[i]..lp[i + 1] {
            work[li[j]] -= lx[j] * xi;
        }
    }
    for (w, d) in work.iter_mut().zip(&fac.dinv) {
        *w *= d;
    }
    for i in (0..dim).rev() {
        let mut xi = work[i];
        for j in lp[i]..lp[i + 1] {
            xi -= lx[j] * work[li[j]];
        }
        work[i] = xi;
    }
    for (k, &p) in sym.perm.iter().enumerate() {
        rhs[p] = work[k];
    }
}

/// Solves `K t = rhs`.
pub fn kkt_solve(
    fac: &NumericFactor,
    sym: &SymbolicFactor,
    rhs: &[f64],
) -> Result<Vec<f64>, LinsysError> {
    if rhs.len() != sym.dim() {
        return Err(LinsysError::Dimension(format!(
            "rhs has length {}, expected {}",
            rhs.len(),
            sym.dim()
        )));
    }
    let mut t = rhs.to_vec();
    let mut work = Vec::with_capacity(t.len());
    kkt_solve_in_place(fac, sym, &mut t, &mut work);
    Ok(t)
}
