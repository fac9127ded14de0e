//! Discrete algebraic Riccati equation by fixed-point iteration of the
//! Riccati difference equation.

use nalgebra::DMatrix;

/// `Q + AᵀXA − AᵀXB (R + BᵀXB)⁻¹ BᵀXA`, or `None` when the inner matrix is
/// singular.
pub fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let xa = x * a;
    let xb = x * b;
    let s = r + b.transpose() * &xb;
    let gain = s.cholesky()?.solve(&(b.transpose() * &xa));
    let next = q + a.transpose() * &xa - (a.transpose() * &xb) * gain;
    // symmetrize against round-off drift
    Some((&next + next.transpose()) * 0.5)
}

/// Largest entry of `riccati_map(X) − X`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> f64 {
    match riccati_map(a, b, q, r, x) {
        Some(next) => (next - x).amax(),
        None => f64::INFINITY,
    }
}

/// Iterates `X ← riccati_map(X)` from `X = Q` until successive iterates
/// differ by at most `tol·max(1, ‖X‖max)`. Returns the fixed point and the
/// iteration count, or `None` on breakdown or after `max_iter` steps.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<(DMatrix<f64>, usize)> {
    let mut x = q.clone();
    for it in 1..=max_iter {
        let next = riccati_map(a, b, q, r, &x)?;
        let diff = (&next - &x).amax();
        x = next;
        if diff <= tol * x.amax().max(1.0) {
            return Some((x, it));
        }
    }
    None
}
