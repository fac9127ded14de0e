//! Dense active-set enumeration for tiny QPs, used as an independent
//! correctness oracle for the ADMM solver.
//!
//! Each candidate working set pairs the equality rows with a choice of
//! inequality rows held at one of their bounds. Only working sets with at
//! most `n` rows and a nonsingular KKT matrix are tried: whenever the
//! optimal set has a vertex, some such set reproduces an optimal point with
//! valid multiplier signs. Directions along which the cost and every
//! bounded row are constant are projected out first, so the optimal set of
//! the reduced problem always has a vertex.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::ProblemData;
use crate::solver::{is_equality_row, Status};
use crate::vector::project_box;

pub const MAX_N: usize = 12;
pub const MAX_M: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("reference solver handles n <= {MAX_N} and m <= {MAX_M}, got n = {n}, m = {m}")]
    TooLarge { n: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// `Solved`, `PrimalInfeasible` or `DualInfeasible`.
    pub status: Status,
    /// Empty unless solved.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: Option<f64>,
}

impl ReferenceSolution {
    fn without_point(status: Status) -> Self {
        Self { status, x: Vec::new(), y: Vec::new(), z: Vec::new(), objective: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Upper,
    Equal,
}

struct Dense<'a> {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: &'a [f64],
    u: &'a [f64],
    tol: f64,
}

struct Candidate {
    x: DVector<f64>,
    y: Vec<f64>,
    objective: f64,
}

impl Dense<'_> {
    fn feasible(&self, x: &DVector<f64>) -> bool {
        let ax = &self.a * x;
        (0..self.a.nrows()).all(|i| {
            let (l, u) = (self.l[i], self.u[i]);
            ax[i] >= l - self.tol * (1.0 + l.abs()) && ax[i] <= u + self.tol * (1.0 + u.abs())
        })
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn try_working_set(&self, set: &[(usize, Side)]) -> Option<Candidate> {
        let n = self.p.nrows();
        let k = set.len();
        if n + k == 0 {
            return self.feasible(&DVector::zeros(0)).then(|| Candidate {
                x: DVector::zeros(0),
                y: vec![0.0; self.a.nrows()],
                objective: 0.0,
            });
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&self.q));
        for (r, &(row, side)) in set.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = self.a[(row, j)];
                kkt[(j, n + r)] = self.a[(row, j)];
            }
            rhs[n + r] = match side {
                Side::Upper => self.u[row],
                Side::Lower | Side::Equal => self.l[row],
            };
        }
        let lu = kkt.full_piv_lu();
        let diag = lu.u().diagonal().abs();
        if diag.min() <= 1e-12 * diag.max().max(1.0) {
            return None;
        }
        let sol = lu.solve(&rhs)?;
        let x = sol.rows(0, n).into_owned();
        let mut y = vec![0.0; self.a.nrows()];
        for (r, &(row, side)) in set.iter().enumerate() {
            let v = sol[n + r];
            let sign_ok = match side {
                Side::Upper => v >= -self.tol,
                Side::Lower => v <= self.tol,
                Side::Equal => true,
            };
            if !sign_ok {
                return None;
            }
            y[row] = v;
        }
        if !self.feasible(&x) {
            return None;
        }
        let objective = self.objective(&x);
        Some(Candidate { x, y, objective })
    }

    /// Greedy maximal linearly independent subset of `rows`.
    fn independent_rows(&self, rows: &[usize]) -> Vec<usize> {
        let n = self.a.ncols();
        let mut kept: Vec<usize> = Vec::new();
        for &row in rows {
            let mut trial = kept.clone();
            trial.push(row);
            let sub = DMatrix::from_fn(trial.len(), n, |i, j| self.a[(trial[i], j)]);
            let sv = sub.singular_values();
            let max = sv.max();
            if max > 0.0 && sv.min() > 1e-10 * max {
                kept = trial;
            }
        }
        kept
    }

    fn best(&self) -> Option<Candidate> {
        let m = self.a.nrows();
        let n = self.p.nrows();
        let eq: Vec<usize> = (0..m).filter(|&i| is_equality_row(self.l[i], self.u[i])).collect();
        let base: Vec<(usize, Side)> = self.independent_rows(&eq).into_iter().map(|i| (i, Side::Equal)).collect();
        if base.len() > n {
            return None;
        }
        let ineq: Vec<usize> = (0..m).filter(|&i| !is_equality_row(self.l[i], self.u[i])).collect();
        let budget = n - base.len();
        let mut best: Option<Candidate> = None;
        let mut set = base;
        self.enumerate(&ineq, 0, budget, &mut set, &mut best);
        best
    }

    fn enumerate(
        &self,
        rows: &[usize],
        next: usize,
        budget: usize,
        set: &mut Vec<(usize, Side)>,
        best: &mut Option<Candidate>,
    ) {
        if next == rows.len() || budget == 0 {
            if let Some(c) = self.try_working_set(set) {
                if best.as_ref().is_none_or(|b| c.objective < b.objective) {
                    *best = Some(c);
                }
            }
            return;
        }
        let row = rows[next];
        self.enumerate(rows, next + 1, budget, set, best);
        for (side, bound) in [(Side::Lower, self.l[row]), (Side::Upper, self.u[row])] {
            if bound.is_finite() {
                set.push((row, side));
                self.enumerate(rows, next + 1, budget - 1, set, best);
                set.pop();
            }
        }
    }
}

/// Orthonormal basis (as columns) of the span of `P`, `q` and the rows of
/// `A` that carry a finite bound. Its orthogonal complement leaves the
/// objective and every constraint unchanged.
fn significant_subspace(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, l: &[f64], u: &[f64]) -> DMatrix<f64> {
    let n = p.nrows();
    let bounded: Vec<usize> = (0..a.nrows()).filter(|&i| l[i].is_finite() || u[i].is_finite()).collect();
    let mut stack = DMatrix::zeros(n + bounded.len() + 1, n);
    stack.rows_mut(0, n).copy_from(p);
    for (r, &i) in bounded.iter().enumerate() {
        stack.row_mut(n + r).copy_from(&a.row(i));
    }
    stack.row_mut(n + bounded.len()).copy_from(&q.transpose());
    let svd = stack.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let max = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| max > 0.0 && svd.singular_values[k] > 1e-10 * max)
        .collect();
    if keep.len() == n {
        return DMatrix::identity(n, n);
    }
    DMatrix::from_fn(n, keep.len(), |i, j| v_t[(keep[j], i)])
}

/// Solves `prob` by enumeration. `tol` bounds the feasibility violation
/// (relative to `1 + |bound|`) and the wrong-sign multiplier magnitude.
///
/// When no KKT point exists, the projection of the origin onto the feasible
/// set is enumerated the same way: if it fails too the problem is reported
/// primal infeasible, otherwise dual infeasible.
pub fn dense_reference_solve(prob: &ProblemData, tol: f64) -> Result<ReferenceSolution, OracleError> {
    let (n, m) = (prob.n(), prob.m());
    if n > MAX_N || m > MAX_M {
        return Err(OracleError::TooLarge { n, m });
    }
    if prob.inconsistent_row().is_some() {
        return Ok(ReferenceSolution::without_point(Status::PrimalInfeasible));
    }
    let upper = DMatrix::from_row_slice(n, n, &prob.p.to_dense());
    let p = DMatrix::from_fn(n, n, |i, j| if i <= j { upper[(i, j)] } else { upper[(j, i)] });
    let q = DVector::from_column_slice(&prob.q);
    let a = DMatrix::from_row_slice(m, n, &prob.a.to_dense());
    let basis = significant_subspace(&p, &q, &a, &prob.l, &prob.u);
    let dense = Dense {
        p: basis.transpose() * &p * &basis,
        q: basis.transpose() * &q,
        a: &a * &basis,
        l: &prob.l,
        u: &prob.u,
        tol,
    };
    if let Some(c) = dense.best() {
        let x = &basis * &c.x;
        let ax = &a * &x;
        let z = (0..m).map(|i| project_box(ax[i], prob.l[i], prob.u[i])).collect();
        return Ok(ReferenceSolution {
            status: Status::Solved,
            x: x.iter().copied().collect(),
            y: c.y,
            z,
            objective: Some(c.objective),
        });
    }
    let phase1 = Dense { p: DMatrix::identity(n, n), q: DVector::zeros(n), a, ..dense };
    let status = if phase1.best().is_some() { Status::DualInfeasible } else { Status::PrimalInfeasible };
    Ok(ReferenceSolution::without_point(status))
}
