use crate::sparse::CscMatrix;

use super::LinsysError;

/// Upper triangle of the quasi-definite matrix
/// `[[P + sigma I, A'], [A, -diag(rho)^-1]]` with bookkeeping that allows
/// `rho`, `sigma`, and the values of `P` and `A` to be rewritten in place.
#[derive(Debug, Clone)]
pub struct KktMatrix {
    k: CscMatrix,
    n: usize,
    m: usize,
    sigma: f64,
    rho: Vec<f64>,
    /// Position of each stored entry of `P` inside `k.values`.
    p_map: Vec<usize>,
    /// Whether the matching entry of `P` lies on the diagonal.
    p_on_diag: Vec<bool>,
    /// Position of each stored entry of `A` inside `k.values`.
    a_map: Vec<usize>,
    /// Position of the `(j, j)` entry for `j < n`.
    p_diag_positions: Vec<usize>,
    /// Position of the `(n + i, n + i)` entry holding `-1/rho_i`.
    rho_diag_positions: Vec<usize>,
}

/// Assembles the KKT matrix. Every diagonal entry of both blocks is stored
/// explicitly, even where `P` has no diagonal entry.
pub fn form_kkt(
    p: &CscMatrix,
    a: &CscMatrix,
    sigma: f64,
    rho: &[f64],
) -> Result<KktMatrix, LinsysError> {
    let n = p.ncols();
    let m = a.nrows();
    if p.nrows() != n || a.ncols() != n {
        return Err(LinsysError::Dimension(format!(
            "P is {}x{}, A is {}x{}",
            p.nrows(),
            p.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    if rho.len() != m {
        return Err(LinsysError::Dimension(format!(
            "rho has length {}, A has {m} rows",
            rho.len()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LinsysError::NonPositive(format!("sigma = {sigma}")));
    }
    if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(LinsysError::NonPositive(format!("rho entry {r}")));
    }
    if !p.is_upper_triangular() {
        return Err(LinsysError::Dimension("P must be stored upper triangular".into()));
    }

    let dim = n + m;
    let nnz_guess = p.nnz() + n + a.nnz() + m;
    let mut colptr = Vec::with_capacity(dim + 1);
    let mut rowind = Vec::with_capacity(nnz_guess);
    let mut values = Vec::with_capacity(nnz_guess);
    let mut p_map = vec![0usize; p.nnz()];
    let mut p_on_diag = vec![false; p.nnz()];
    let mut p_diag_positions = vec![0usize; n];
    colptr.push(0);

    for j in 0..n {
        let mut has_diag = false;
        for k in p.colptr()[j]..p.colptr()[j + 1] {
            let i = p.rowind()[k];
            p_map[k] = values.len();
            if i == j {
                has_diag = true;
                p_on_diag[k] = true;
                p_diag_positions[j] = values.len();
                rowind.push(i);
                values.push(p.values()[k] + sigma);
            } else {
                rowind.push(i);
                values.push(p.values()[k]);
            }
        }
        if !has_diag {
            p_diag_positions[j] = values.len();
            rowind.push(j);
            values.push(sigma);
        }
        colptr.push(values.len());
    }

    // Row i of A becomes column n + i of the upper triangle. Walking A
    // column by column yields each row's entries in increasing column order.
    let mut row_entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for j in 0..n {
        for k in a.colptr()[j]..a.colptr()[j + 1] {
            row_entries[a.rowind()[k]].push((j, k));
        }
    }
    let mut a_map = vec![0usize; a.nnz()];
    let mut rho_diag_positions = vec![0usize; m];
    for (i, entries) in row_entries.iter().enumerate() {
        for &(j, k) in entries {
            a_map[k] = values.len();
            rowind.push(j);
            values.push(a.values()[k]);
        }
        rho_diag_positions[i] = values.len();
        rowind.push(n + i);
        values.push(-1.0 / rho[i]);
        colptr.push(values.len());
    }

    Ok(KktMatrix {
        k: CscMatrix::from_parts_unchecked(dim, dim, colptr, rowind, values),
        n,
        m,
        sigma,
        rho: rho.to_vec(),
        p_map,
        p_on_diag,
        a_map,
        p_diag_positions,
        rho_diag_positions,
    })
}

impl KktMatrix {
    pub fn matrix(&self) -> &CscMatrix {
        &self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_diag_positions(&self) -> &[usize] {
        &self.rho_diag_positions
    }

    /// Overwrites the `-1/rho_i` diagonal entries in `O(m)`.
    pub fn set_rho(&mut self, rho: &[f64]) -> Result<(), LinsysError> {
        if rho.len() != self.m {
            return Err(LinsysError::Dimension(format!(
                "rho has length {}, expected {}",
                rho.len(),
                self.m
            )));
        }
        if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(LinsysError::NonPositive(format!("rho entry {r}")));
        }
        let vals = self.k.values_mut();
        for (&pos, &r) in self.rho_diag_positions.iter().zip(rho) {
            vals[pos] = -1.0 / r;
        }
        self.rho.copy_from_slice(rho);
        Ok(())
    }

    /// Replaces `sigma`, keeping `P` on the diagonal.
    pub fn set_sigma(&mut self, sigma: f64) -> Result<(), LinsysError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LinsysError::NonPositive(format!("sigma = {sigma}")));
        }
        let delta = sigma - self.sigma;
        let vals = self.k.values_mut();
        for &pos in &self.p_diag_positions {
            vals[pos] += delta;
        }
        self.sigma = sigma;
        Ok(())
    }

    /// Rewrites the values of `P` and `A`; both must keep the sparsity
    /// pattern the matrix was formed with.
    pub fn set_matrix_values(&mut self, p: &CscMatrix, a: &CscMatrix) -> Result<(), LinsysError> {
        if p.nnz() != self.p_map.len() || a.nnz() != self.a_map.len() {
            return Err(LinsysError::Dimension(format!(
                "expected nnz(P) = {}, nnz(A) = {}; got {}, {}",
                self.p_map.len(),
                self.a_map.len(),
                p.nnz(),
                a.nnz()
            )));
        }
        let sigma = self.sigma;
        let vals = self.k.values_mut();
        for &pos in &self.p_diag_positions {
            vals[pos] = sigma;
        }
        for (k, &pos) in self.p_map.iter().enumerate() {
            vals[pos] = if self.p_on_diag[k] {
                p.values()[k] + sigma
            } else {
                p.values()[k]
            };
        }
        for (k, &pos) in self.a_map.iter().enumerate() {
            vals[pos] = a.values()[k];
        }
        Ok(())
    }
}
