use thiserror::Error;

use crate::sparse::{normalize_bound, CscMatrix, SparseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inconsistent bounds on row {row}: l = {lower} > u = {upper}")]
    InconsistentBounds { row: usize, lower: f64, upper: f64 },
    #[error("non-finite problem data in {0}")]
    NonFinite(&'static str),
}

/// A QP instance `minimize 1/2 x'Px + q'x  s.t.  l <= Ax <= u`.
///
/// `p` holds the upper triangle of the symmetric cost matrix. Bound values of
/// magnitude `>= 1e30` are stored as IEEE infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl ProblemData {
    /// Checks dimensions and folds a full symmetric `p` to its upper
    /// triangle. Bounds are normalized but `l <= u` is not enforced here;
    /// see [`ProblemData::check_bounds`].
    pub fn new(
        p: CscMatrix,
        q: Vec<f64>,
        a: CscMatrix,
        l: Vec<f64>,
        u: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        let n = q.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(ProblemError::Dimension(format!(
                "P is {}x{} but q has length {n}",
                p.nrows(),
                p.ncols()
            )));
        }
        if a.ncols() != n {
            return Err(ProblemError::Dimension(format!(
                "A has {} columns but n = {n}",
                a.ncols()
            )));
        }
        let m = a.nrows();
        if l.len() != m || u.len() != m {
            return Err(ProblemError::Dimension(format!(
                "A has {m} rows but l, u have lengths {}, {}",
                l.len(),
                u.len()
            )));
        }
        if !p.values().iter().all(|v| v.is_finite()) {
            return Err(ProblemError::NonFinite("P"));
        }
        if !a.values().iter().all(|v| v.is_finite()) {
            return Err(ProblemError::NonFinite("A"));
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(ProblemError::NonFinite("q"));
        }
        if l.iter().chain(&u).any(|v| v.is_nan()) {
            return Err(ProblemError::NonFinite("bounds"));
        }
        let p = p.to_upper_triangular()?;
        Ok(Self {
            p,
            q,
            a,
            l: l.into_iter().map(normalize_bound).collect(),
            u: u.into_iter().map(normalize_bound).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    /// `nnz(P) + nnz(A)`.
    pub fn nnz(&self) -> usize {
        self.p.nnz() + self.a.nnz()
    }

    /// First row with `l > u`, if any.
    pub fn inconsistent_row(&self) -> Option<usize> {
        self.l.iter().zip(&self.u).position(|(l, u)| l > u)
    }

    pub fn check_bounds(&self) -> Result<(), ProblemError> {
        match self.inconsistent_row() {
            Some(row) => Err(ProblemError::InconsistentBounds {
                row,
                lower: self.l[row],
                upper: self.u[row],
            }),
            None => Ok(()),
        }
    }

    /// `1/2 x'Px + q'x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n()];
        self.p.sym_upper_mul_vec_into(x, &mut px);
        0.5 * crate::vector::dot(x, &px) + crate::vector::dot(&self.q, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_folds_full_p_and_normalizes_bounds() {
        let p = CscMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let a = CscMatrix::identity(2);
        let prob = ProblemData::new(p, vec![0.0, 0.0], a, vec![-1e30, 0.0], vec![1.0, 2e30]).unwrap();
        assert!(prob.p.is_upper_triangular());
        assert_eq!(prob.p.nnz(), 3);
        assert_eq!(prob.l[0], f64::NEG_INFINITY);
        assert_eq!(prob.u[1], f64::INFINITY);
        assert_eq!(prob.nnz(), 5);
    }

    #[test]
    fn dimension_errors() {
        let p = CscMatrix::identity(2);
        let a = CscMatrix::identity(3);
        assert!(ProblemData::new(p.clone(), vec![0.0; 2], a, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(ProblemData::new(p, vec![0.0; 3], CscMatrix::zeros(0, 3), vec![], vec![]).is_err());
    }

    #[test]
    fn inconsistent_bounds_are_detected_not_rejected() {
        let prob = ProblemData::new(
            CscMatrix::identity(1),
            vec![0.0],
            CscMatrix::identity(1),
            vec![2.0],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(prob.inconsistent_row(), Some(0));
        assert!(prob.check_bounds().is_err());
    }

    #[test]
    fn objective_uses_symmetric_p() {
        let p = CscMatrix::from_dense(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let prob =
            ProblemData::new(p, vec![1.0, 0.0], CscMatrix::zeros(0, 2), vec![], vec![]).unwrap();
        // 0.5 * [1 1] [[2 1][1 2]] [1 1]' + 1 = 0.5 * 6 + 1
        assert_eq!(prob.objective(&[1.0, 1.0]), 4.0);
    }
}
