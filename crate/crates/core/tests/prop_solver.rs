mod common;

use proptest::prelude::*;

use splitqp::probgen::random_qp;
use splitqp::problem::ProblemData;
use splitqp::solver::termination::unscaled_residual_info;
use splitqp::solver::{solve, Settings, Solver, Status};
use splitqp::sparse::CscMatrix;

use common::fuzz_problem;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solved_random_qps_meet_the_tolerances(n in 1..=20usize, seed in any::<u64>()) {
        let prob = random_qp(n, seed).unwrap();
        let settings = Settings::default();
        let res = solve(prob.clone(), settings.clone()).unwrap();
        prop_assert_eq!(res.status, Status::Solved);
        let sol = res.solution.as_ref().unwrap();
        let info = unscaled_residual_info(&prob, &sol.x, &sol.y, &sol.z, settings.eps_abs, settings.eps_rel);
        prop_assert!(info.converged(), "prim {} / {} dual {} / {}", info.prim_res, info.eps_prim, info.dual_res, info.eps_dual);
    }

    #[test]
    fn results_carry_a_point_or_a_certificate(seed in any::<u64>()) {
        let prob = fuzz_problem(seed);
        let res = solve(prob.clone(), Settings::default()).unwrap();
        match res.status {
            Status::Solved | Status::SolvedInaccurate | Status::MaxIterReached | Status::TimeLimitReached => {
                prop_assert!(res.solution.is_some() && res.certificate.is_none());
            }
            Status::PrimalInfeasible | Status::DualInfeasible => {
                prop_assert!(res.solution.is_none() && res.certificate.is_some());
                prop_assert!(res.objective.is_none());
            }
            Status::NumericalError => prop_assert!(res.certificate.is_none()),
        }
        if let Some(sol) = &res.solution {
            for i in 0..prob.m() {
                prop_assert!(prob.l[i] <= sol.z[i] && sol.z[i] <= prob.u[i]);
            }
        }
    }

    #[test]
    fn scaled_iterates_stay_in_the_box(seed in any::<u64>(), iters in 1..40usize) {
        let mut solver = Solver::setup(fuzz_problem(seed), Settings::default()).unwrap();
        for _ in 0..iters {
            solver.admm_iterate().unwrap();
        }
        let sc = &solver.scaling().scaled;
        let (_, z, _) = solver.iterates();
        for i in 0..z.len() {
            prop_assert!(sc.l[i] <= z[i] && z[i] <= sc.u[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn warm_start_at_the_solution_stops_at_the_first_check(n in 1..=10usize, seed in any::<u64>()) {
        let prob = random_qp(n, seed).unwrap();
        // the polished point is the exact solution; an eps-accurate ADMM
        // iterate is not a fixed point
        let settings = Settings::default();
        let mut solver = Solver::setup(prob, settings.clone()).unwrap();
        let first = solver.solve();
        prop_assert_eq!(first.status, Status::Solved);
        prop_assume!(first.polish_succeeded());
        let sol = first.solution.unwrap();
        solver.warm_start(&sol.x, &sol.y).unwrap();
        let again = solver.solve();
        prop_assert_eq!(again.status, Status::Solved);
        prop_assert!(again.iterations <= settings.check_termination_every, "{} iterations", again.iterations);
    }
}

#[test]
fn crossed_bounds_are_reported_without_iterating() {
    let prob = ProblemData::new(
        CscMatrix::identity(2),
        vec![0.0, 0.0],
        CscMatrix::identity(2),
        vec![0.0, 3.0],
        vec![1.0, 2.0],
    )
    .unwrap();
    let res = solve(prob, Settings::default()).unwrap();
    assert_eq!(res.status, Status::PrimalInfeasible);
    assert_eq!(res.inconsistent_row, Some(1));
    assert_eq!(res.iterations, 0);
}

#[test]
fn unconstrained_problems_are_driven_by_the_dual_residual() {
    let prob = ProblemData::new(CscMatrix::diagonal(&[2.0, 4.0]), vec![-2.0, 4.0], CscMatrix::zeros(0, 2), vec![], vec![]).unwrap();
    let res = solve(prob, Settings::default()).unwrap();
    assert_eq!(res.status, Status::Solved);
    let x = &res.solution.unwrap().x;
    assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6);
    assert_eq!(res.prim_res, 0.0);
}
