//! Modified Ruiz equilibration of the problem data with cost normalization.
//!
//! The scaled problem is `P̄ = c D P D`, `q̄ = c D q`, `Ā = E A D`,
//! `l̄ = E l`, `ū = E u`. Scaled iterates relate to the original ones by
//! `x = D x̄`, `y = E ȳ / c`, `z = E⁻¹ z̄`.

use crate::problem::ProblemData;
use crate::vector::inf_norm;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
    pub dinv: Vec<f64>,
    pub einv: Vec<f64>,
    pub scaled: ProblemData,
    /// Number of equilibration vectors evaluated, including the final one
    /// that met the tolerance.
    pub iterations_used: usize,
    pub converged: bool,
}

const MIN_NORM: f64 = 1e-4;
const MAX_NORM: f64 = 1e4;

/// Norms below `1e-4` count as 1, norms above `1e4` are capped, so that
/// near-empty rows and columns are left unscaled and no single pass
/// changes an entry by more than a factor of 100.
fn limit_norm(norm: f64) -> f64 {
    if norm < MIN_NORM {
        1.0
    } else {
        norm.min(MAX_NORM)
    }
}

fn guarded_inv_sqrt(norm: f64) -> f64 {
    1.0 / limit_norm(norm).sqrt()
}

/// Multiplies a bound by a positive factor; infinities stay infinite.
pub fn scale_bound(v: f64, s: f64) -> f64 {
    if v.is_infinite() {
        v
    } else {
        v * s
    }
}

/// Column infinity norms of `[[P, A'], [A, 0]]`, split into the first `n`
/// and last `m` columns.
fn stacked_column_norms(prob: &ProblemData) -> (Vec<f64>, Vec<f64>) {
    let mut top = prob.p.col_inf_norms(true);
    for (t, a) in top.iter_mut().zip(prob.a.col_inf_norms(false)) {
        *t = t.max(a);
    }
    (top, prob.a.row_inf_norms())
}

/// Equilibration vectors `delta` for the current data.
fn ruiz_step(prob: &ProblemData) -> (Vec<f64>, Vec<f64>) {
    let (top, bottom) = stacked_column_norms(prob);
    (
        top.into_iter().map(guarded_inv_sqrt).collect(),
        bottom.into_iter().map(guarded_inv_sqrt).collect(),
    )
}

fn apply_column_scaling(prob: &mut ProblemData, dn: &[f64], dm: &[f64]) {
    prob.p.scale_rows_cols(dn, dn);
    prob.a.scale_rows_cols(dm, dn);
    for (qi, s) in prob.q.iter_mut().zip(dn) {
        *qi *= s;
    }
    for i in 0..dm.len() {
        prob.l[i] = scale_bound(prob.l[i], dm[i]);
        prob.u[i] = scale_bound(prob.u[i], dm[i]);
    }
}

/// Cost scaling factor `1 / max(mean column norm of P, ||q||)` with both
/// measures passed through [`limit_norm`]; a vanishing `q` counts as norm 1.
fn cost_factor(prob: &ProblemData) -> f64 {
    let n = prob.n();
    let mean = if n == 0 {
        0.0
    } else {
        prob.p.col_inf_norms(true).iter().sum::<f64>() / n as f64
    };
    1.0 / limit_norm(mean.max(limit_norm(inf_norm(&prob.q))))
}

/// Runs at most `max_iter` equilibration passes. A pass whose vector is
/// within `eps` of all-ones ends the loop before being applied.
pub fn ruiz_equilibrate(problem: &ProblemData, eps: f64, max_iter: usize) -> ScalingResult {
    let (n, m) = (problem.n(), problem.m());
    let mut scaled = problem.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;
    let mut iterations_used = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        let (dn, dm) = ruiz_step(&scaled);
        iterations_used += 1;
        let dist = dn.iter().chain(&dm).fold(0.0f64, |acc, v| acc.max((1.0 - v).abs()));
        if dist <= eps {
            converged = true;
            break;
        }
        apply_column_scaling(&mut scaled, &dn, &dm);
        for (di, s) in d.iter_mut().zip(&dn) {
            *di *= s;
        }
        for (ei, s) in e.iter_mut().zip(&dm) {
            *ei *= s;
        }
        let gamma = cost_factor(&scaled);
        scaled.p.scale(gamma);
        scaled.q.iter_mut().for_each(|v| *v *= gamma);
        c *= gamma;
    }

    ScalingResult {
        dinv: d.iter().map(|v| 1.0 / v).collect(),
        einv: e.iter().map(|v| 1.0 / v).collect(),
        d,
        e,
        c,
        scaled,
        iterations_used,
        converged,
    }
}

impl ScalingResult {
    /// Identity scaling of `problem`.
    pub fn identity(problem: &ProblemData) -> Self {
        ruiz_equilibrate(problem, 1.0, 0)
    }

    pub fn scale_q(&self, q: &[f64]) -> Vec<f64> {
        q.iter().zip(&self.d).map(|(v, d)| self.c * d * v).collect()
    }

    pub fn scale_bounds(&self, b: &[f64]) -> Vec<f64> {
        b.iter().zip(&self.e).map(|(v, e)| scale_bound(*v, *e)).collect()
    }

    /// `x̄ = D⁻¹ x`.
    pub fn scale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.dinv).map(|(v, s)| v * s).collect()
    }

    /// `ȳ = c E⁻¹ y`.
    pub fn scale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.einv).map(|(v, s)| self.c * v * s).collect()
    }

    /// `z̄ = E z`.
    pub fn scale_z(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.e).map(|(v, s)| v * s).collect()
    }

    pub fn unscale_x(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().zip(&self.d).map(|(v, s)| v * s).collect()
    }

    pub fn unscale_y(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().zip(&self.e).map(|(v, s)| v * s / self.c).collect()
    }

    pub fn unscale_z(&self, zs: &[f64]) -> Vec<f64> {
        zs.iter().zip(&self.einv).map(|(v, s)| v * s).collect()
    }
}

/// Maps scaled iterates back to the original problem.
pub fn unscale_solution(
    xs: &[f64],
    ys: &[f64],
    zs: &[f64],
    s: &ScalingResult,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (s.unscale_x(xs), s.unscale_y(ys), s.unscale_z(zs))
}

/// Residuals of the original problem computed from scaled iterates:
/// `r_prim = E⁻¹(Āx̄ − z̄)`, `r_dual = c⁻¹D⁻¹(P̄x̄ + q̄ + Āᵀȳ)`.
pub fn unscaled_residuals(
    s: &ScalingResult,
    xs: &[f64],
    ys: &[f64],
    zs: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let prob = &s.scaled;
    let (n, m) = (prob.n(), prob.m());
    let mut ax = vec![0.0; m];
    prob.a.mul_vec_into(xs, &mut ax, false);
    let r_prim = (0..m).map(|i| s.einv[i] * (ax[i] - zs[i])).collect();

    let mut px = vec![0.0; n];
    prob.p.sym_upper_mul_vec_into(xs, &mut px);
    let mut aty = vec![0.0; n];
    prob.a.mul_vec_into(ys, &mut aty, true);
    let r_dual = (0..n)
        .map(|j| s.dinv[j] * (px[j] + prob.q[j] + aty[j]) / s.c)
        .collect();
    (r_prim, r_dual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CscMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unconstrained(p: CscMatrix, q: Vec<f64>) -> ProblemData {
        let n = q.len();
        ProblemData::new(p, q, CscMatrix::zeros(0, n), vec![], vec![]).unwrap()
    }

    fn random_problem(seed: u64, n: usize, m: usize) -> ProblemData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pd = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                if i == j || rng.random::<f64>() < 0.4 {
                    let v = (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-2..3));
                    pd[i * n + j] = v;
                    pd[j * n + i] = v;
                }
            }
        }
        let ad: Vec<f64> = (0..m * n)
            .map(|_| if rng.random::<f64>() < 0.5 { (rng.random::<f64>() - 0.5) * 100.0 } else { 0.0 })
            .collect();
        let q = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let l = (0..m).map(|i| if i % 3 == 0 { f64::NEG_INFINITY } else { -rng.random::<f64>() }).collect();
        let u = (0..m).map(|i| if i % 4 == 1 { f64::INFINITY } else { rng.random::<f64>() }).collect();
        ProblemData::new(
            CscMatrix::from_dense(n, n, &pd),
            q,
            CscMatrix::from_dense(m, n, &ad),
            l,
            u,
        )
        .unwrap()
    }

    #[test]
    fn already_equilibrated() {
        let s = ruiz_equilibrate(&unconstrained(CscMatrix::identity(1), vec![0.0]), 1e-3, 10);
        assert_eq!(s.d, vec![1.0]);
        assert_eq!(s.c, 1.0);
        assert_eq!(s.iterations_used, 1);
        assert!(s.converged);
    }

    #[test]
    fn badly_scaled_diagonal() {
        let p = CscMatrix::diagonal(&[100.0, 0.01]);
        let s = ruiz_equilibrate(&unconstrained(p, vec![0.0, 0.0]), 1e-3, 10);
        assert!(s.converged);
        // Recompute the scaled diagonal densely from D and c.
        let diag = [100.0 * s.d[0] * s.d[0] * s.c, 0.01 * s.d[1] * s.d[1] * s.c];
        for (k, v) in diag.iter().enumerate() {
            assert!((v - 1.0).abs() <= 1e-3, "entry {k} = {v}");
            assert!((s.scaled.p.get(k, k) - v).abs() <= 1e-15);
        }
    }

    #[test]
    fn disabled_scaling_is_identity() {
        let prob = random_problem(1, 4, 3);
        let s = ruiz_equilibrate(&prob, 1e-3, 0);
        assert_eq!(s.d, vec![1.0; 4]);
        assert_eq!(s.e, vec![1.0; 3]);
        assert_eq!(s.c, 1.0);
        assert_eq!(s.scaled, prob);
    }

    #[test]
    fn scaled_data_matches_definition() {
        let prob = random_problem(7, 5, 4);
        let s = ruiz_equilibrate(&prob, 1e-3, 10);
        for (i, j, v) in prob.p.iter() {
            let expect = s.c * s.d[i] * v * s.d[j];
            assert!((s.scaled.p.get(i, j) - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
        }
        for (i, j, v) in prob.a.iter() {
            let expect = s.e[i] * v * s.d[j];
            assert!((s.scaled.a.get(i, j) - expect).abs() <= 1e-12 * expect.abs());
        }
        for i in 0..prob.m() {
            if prob.l[i].is_infinite() {
                assert_eq!(s.scaled.l[i], prob.l[i]);
            }
            if prob.u[i].is_infinite() {
                assert_eq!(s.scaled.u[i], prob.u[i]);
            }
        }
        assert!(s.c > 0.0);
    }

    #[test]
    fn converged_exit_is_a_fixed_point() {
        for seed in 0..20 {
            let prob = random_problem(seed, 6, 5);
            let s = ruiz_equilibrate(&prob, 1e-3, 50);
            if s.converged {
                let (dn, dm) = ruiz_step(&s.scaled);
                let dist = dn.iter().chain(&dm).fold(0.0f64, |a, v| a.max((1.0 - v).abs()));
                assert!(dist <= 1e-3);
            }
        }
    }

    #[test]
    fn unscale_example() {
        let prob = ProblemData::new(
            CscMatrix::identity(1),
            vec![0.0],
            CscMatrix::identity(1),
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let mut s = ScalingResult::identity(&prob);
        s.d = vec![2.0];
        s.dinv = vec![0.5];
        s.e = vec![4.0];
        s.einv = vec![0.25];
        s.c = 0.5;
        let (x, y, z) = unscale_solution(&[1.0], &[1.0], &[8.0], &s);
        assert_eq!((x, y, z), (vec![2.0], vec![8.0], vec![2.0]));
    }

    #[test]
    fn scale_round_trip() {
        let prob = random_problem(3, 5, 6);
        let s = ruiz_equilibrate(&prob, 1e-3, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let (x2, y2, z2) = unscale_solution(&s.scale_x(&x), &s.scale_y(&y), &s.scale_z(&y), &s);
        for (a, b) in x.iter().zip(&x2).chain(y.iter().zip(&y2)).chain(y.iter().zip(&z2)) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn residuals_without_scaling() {
        let prob = ProblemData::new(
            CscMatrix::identity(1),
            vec![1.0],
            CscMatrix::identity(1),
            vec![-1.0],
            vec![1.0],
        )
        .unwrap();
        let s = ScalingResult::identity(&prob);
        let (rp, rd) = unscaled_residuals(&s, &[0.0], &[0.0], &[0.0]);
        assert_eq!(rp, vec![0.0]);
        assert_eq!(rd, vec![1.0]);
    }

    #[test]
    fn residuals_match_unscaled_computation() {
        let prob = random_problem(11, 6, 4);
        let s = ruiz_equilibrate(&prob, 1e-3, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
        let z: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
        let (rp, rd) = unscaled_residuals(&s, &s.scale_x(&x), &s.scale_y(&y), &s.scale_z(&z));

        let mut ax = vec![0.0; 4];
        prob.a.mul_vec_into(&x, &mut ax, false);
        let mut px = vec![0.0; 6];
        prob.p.sym_upper_mul_vec_into(&x, &mut px);
        let mut aty = vec![0.0; 6];
        prob.a.mul_vec_into(&y, &mut aty, true);
        for i in 0..4 {
            let expect = ax[i] - z[i];
            assert!((rp[i] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
        for j in 0..6 {
            let expect = px[j] + prob.q[j] + aty[j];
            assert!((rd[j] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }
}
