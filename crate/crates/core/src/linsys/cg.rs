//! Jacobi-preconditioned conjugate gradient on the reduced system
//! `(P + sigma I + A' diag(rho) A) x = rhs`, applied matrix-free.

use crate::sparse::CscMatrix;
use crate::vector::{dot, norm2};

use super::LinsysError;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final `||r||_2`.
    pub residual: f64,
}

/// Reduced operator `P + sigma I + A' diag(rho) A` with scratch space.
pub struct ReducedOperator<'a> {
    p: &'a CscMatrix,
    a: &'a CscMatrix,
    sigma: f64,
    rho: &'a [f64],
    tmp_n: Vec<f64>,
    tmp_m: Vec<f64>,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(p: &'a CscMatrix, a: &'a CscMatrix, sigma: f64, rho: &'a [f64]) -> Self {
        Self {
            p,
            a,
            sigma,
            rho,
            tmp_n: vec![0.0; p.ncols()],
            tmp_m: vec![0.0; a.nrows()],
        }
    }

    pub fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        self.p.sym_upper_mul_vec_into(x, y);
        self.a.mul_vec_into(x, &mut self.tmp_m, false);
        for (t, r) in self.tmp_m.iter_mut().zip(self.rho) {
            *t *= r;
        }
        self.a.mul_vec_into(&self.tmp_m, &mut self.tmp_n, true);
        for ((yi, xi), ti) in y.iter_mut().zip(x).zip(&self.tmp_n) {
            *yi += self.sigma * xi + ti;
        }
    }

    /// Diagonal of the operator.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.p.ncols();
        let mut d = vec![self.sigma; n];
        for (i, j, v) in self.p.iter() {
            if i == j {
                d[j] += v;
            }
        }
        for (i, j, v) in self.a.iter() {
            d[j] += self.rho[i] * v * v;
        }
        d
    }
}

/// Stops when `||r||_2 <= tol * ||rhs||_2` or after `max_iter` iterations.
#[allow(clippy::too_many_arguments)]
pub fn cg_solve_reduced(
    p: &CscMatrix,
    a: &CscMatrix,
    sigma: f64,
    rho: &[f64],
    rhs: &[f64],
    x_warm: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome, LinsysError> {
    let n = p.ncols();
    if p.nrows() != n || a.ncols() != n || rho.len() != a.nrows() {
        return Err(LinsysError::Dimension(format!(
            "P is {}x{}, A is {}x{}, rho has length {}",
            p.nrows(),
            p.ncols(),
            a.nrows(),
            a.ncols(),
            rho.len()
        )));
    }
    if rhs.len() != n || x_warm.len() != n {
        return Err(LinsysError::Dimension(format!(
            "rhs and warm start must have length {n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(LinsysError::NonPositive(format!("tol = {tol}")));
    }
    if !(sigma > 0.0) {
        return Err(LinsysError::NonPositive(format!("sigma = {sigma}")));
    }

    let mut op = ReducedOperator::new(p, a, sigma, rho);
    let precond: Vec<f64> = op.diagonal().into_iter().map(|d| 1.0 / d).collect();
    let target = tol * norm2(rhs);

    let mut x = x_warm.to_vec();
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut res = norm2(&r);
    if res <= target {
        return Ok(CgOutcome { x, iterations: 0, converged: true, residual: res });
    }
    let mut zv: Vec<f64> = r.iter().zip(&precond).map(|(ri, mi)| ri * mi).collect();
    let mut dir = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut ad = vec![0.0; n];

    for it in 1..=max_iter {
        op.apply(&dir, &mut ad);
        let curv = dot(&dir, &ad);
        if !(curv > 0.0) {
            return Ok(CgOutcome { x, iterations: it - 1, converged: false, residual: res });
        }
        let step = rz / curv;
        for i in 0..n {
            x[i] += step * dir[i];
            r[i] -= step * ad[i];
        }
        res = norm2(&r);
        if res <= target {
            return Ok(CgOutcome { x, iterations: it, converged: true, residual: res });
        }
        for i in 0..n {
            zv[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = zv[i] + beta * dir[i];
        }
    }
    Ok(CgOutcome { x, iterations: max_iter, converged: false, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cost_without_constraints() {
        let p = CscMatrix::identity(3);
        let a = CscMatrix::zeros(0, 3);
        let rhs = [1.0, -2.0, 3.0];
        let out = cg_solve_reduced(&p, &a, 1e-6, &[], &rhs, &[0.0; 3], 1e-12, 10).unwrap();
        assert!(out.converged);
        for (x, b) in out.x.iter().zip(rhs) {
            assert!((x - b / (1.0 + 1e-6)).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_system() {
        let p = CscMatrix::from_dense(1, 1, &[2.0]);
        let a = CscMatrix::from_dense(1, 1, &[1.0]);
        let out = cg_solve_reduced(&p, &a, 1.0, &[4.0], &[7.0], &[0.0], 1e-12, 5).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let m = 3;
        let mdense = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let pd = &mdense * mdense.transpose();
        let ad = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5);
        let rho = [0.5, 2.0, 1.0];
        let sigma = 1e-3;
        let rhs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

        let p_rows: Vec<f64> = pd.transpose().iter().copied().collect();
        let a_rows: Vec<f64> = ad.transpose().iter().copied().collect();
        let p = CscMatrix::from_dense(n, n, &p_rows).to_upper_triangular().unwrap();
        let a = CscMatrix::from_dense(m, n, &a_rows);
        let out = cg_solve_reduced(&p, &a, sigma, &rho, &rhs, &[0.0; 5], 1e-12, 100).unwrap();
        assert!(out.converged);

        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&rho));
        let k = &pd + DMatrix::identity(n, n) * sigma + ad.transpose() * r * &ad;
        let expect = k.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..n {
            assert!((out.x[i] - expect[i]).abs() < 1e-9 * expect.amax().max(1.0));
        }
    }

    #[test]
    fn warm_start_at_solution_takes_no_iterations() {
        let p = CscMatrix::identity(2);
        let a = CscMatrix::zeros(0, 2);
        let out = cg_solve_reduced(&p, &a, 1.0, &[], &[2.0, 4.0], &[1.0, 2.0], 1e-10, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }
}
