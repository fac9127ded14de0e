mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use splitqp::linsys::{form_kkt, numeric_factor, symbolic_factor, Ordering};
use splitqp::polish::iterative_refine;
use splitqp::probgen::eq_qp;
use splitqp::problem::ProblemData;
use splitqp::solver::termination::unscaled_residual_info;
use splitqp::solver::{solve, Settings, SolveResult, Status};

use common::{csc, fuzz_problem, normal, psd_dense, rng, sparse_dense};

fn residuals(prob: &ProblemData, res: &SolveResult) -> (f64, f64) {
    let sol = res.solution.as_ref().unwrap();
    let info = unscaled_residual_info(prob, &sol.x, &sol.y, &sol.z, 0.0, 0.0);
    (info.prim_res, info.dual_res)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Error to the exact solution of `[[P, Aᵀ], [A, 0]] t = g` after each
    /// pass with the factor of `[[P + δI, Aᵀ], [A, −δI]]`.
    #[test]
    fn refinement_error_decreases_monotonically(seed in any::<u64>()) {
        let mut r = rng(seed, 21);
        let n = r.random_range(2..=10);
        let m = r.random_range(1..=n / 2 + 1).min(n - 1);
        let mut p = psd_dense(&mut r, n, n);
        for i in 0..n {
            p[i * n + i] += 1.0;
        }
        let a = sparse_dense(&mut r, m, n, 0.7);
        let delta = 10f64.powf(r.random_range(-8.0..-3.0));
        let (pc, ac) = (csc(n, n, &p), csc(m, n, &a));

        let dim = n + m;
        let mut k = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in i..n {
                k[(i, j)] = p[i * n + j];
                k[(j, i)] = p[i * n + j];
            }
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + i, j)] = a[i * n + j];
                k[(j, n + i)] = a[i * n + j];
            }
        }
        let g: Vec<f64> = (0..dim).map(|_| normal(&mut r)).collect();
        let exact = match k.clone().lu().solve(&DVector::from_column_slice(&g)) {
            Some(t) => t,
            None => return Ok(()),
        };
        let sv = k.clone().singular_values();
        prop_assume!(sv.min() > 1e-3 * sv.max());
        prop_assume!(delta <= 1e-2 * k.norm());

        let kkt = form_kkt(&pc, &ac, delta, &vec![1.0 / delta; m]).unwrap();
        let sym = symbolic_factor(kkt.matrix(), Ordering::Amd).unwrap();
        let fac = numeric_factor(kkt.matrix(), &sym).unwrap();
        let floor = 1e-13 * exact.amax().max(1.0);
        let mut prev = f64::INFINITY;
        for steps in 0..6 {
            let t = iterative_refine(
                |v: &[f64], out: &mut [f64]| out.copy_from_slice((&k * DVector::from_column_slice(v)).as_slice()),
                &fac,
                &sym,
                &g,
                steps,
            );
            let err = (DVector::from_vec(t) - &exact).amax();
            prop_assert!(err <= prev || err <= floor, "step {}: {} after {}", steps, err, prev);
            prev = err;
        }
    }

    #[test]
    fn polish_never_increases_residuals(seed in any::<u64>()) {
        let prob = fuzz_problem(seed);
        let with = solve(prob.clone(), Settings::default()).unwrap();
        let without = solve(prob.clone(), Settings { polish: false, ..Settings::default() }).unwrap();
        prop_assume!(with.status == Status::Solved);
        let (pp, pd) = residuals(&prob, &with);
        let (ap, ad) = residuals(&prob, &without);
        prop_assert!(pp <= ap && pd <= ad, "polished ({}, {}) unpolished ({}, {})", pp, pd, ap, ad);
    }
}

/// All rows are active, so the polished point is the regularized KKT
/// solution corrected by refinement. Contraction per pass is
/// `||(K + ΔK)⁻¹ ΔK||`, close to 1 on some instances, so the pass count is
/// raised well above the default.
#[test]
fn equality_qps_polish_to_refinement_accuracy() {
    let settings = Settings { refine_steps: 25, ..Settings::default() };
    let mut checked = 0;
    for seed in 0..100 {
        let prob = eq_qp(16, seed).unwrap();
        let res = solve(prob.clone(), settings.clone()).unwrap();
        if res.status != Status::Solved {
            continue;
        }
        checked += 1;
        assert!(res.polish_succeeded(), "seed {seed}");
        let (prim, dual) = residuals(&prob, &res);
        assert!(prim.max(dual) <= 1e-9, "seed {seed}: ({prim:e}, {dual:e})");
    }
    assert!(checked >= 10, "only {checked} feasible instances");
}
