use proptest::prelude::*;

use splitqp::probgen::dare::dare_residual;
use splitqp::probgen::{control_model, spectral_radius, GenSpec, ProblemClass, CONTROL_HORIZON};

fn class() -> impl Strategy<Value = ProblemClass> {
    (0..7usize).prop_map(|c| ProblemClass::ALL[c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn generation_is_deterministic(class in class(), dim in 1..=4usize, seed in any::<u64>()) {
        let spec = GenSpec::new(class, dim, seed);
        prop_assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
    }

    #[test]
    fn seeds_give_different_instances(class in class(), dim in 1..=4usize, seed in 0..u64::MAX) {
        let a = GenSpec::new(class, dim, seed).generate().unwrap();
        let b = GenSpec::new(class, dim, seed + 1).generate().unwrap();
        prop_assert_ne!(a, b);
    }

    #[test]
    fn instances_are_well_formed(class in class(), dim in 1..=4usize, seed in any::<u64>()) {
        let prob = GenSpec::new(class, dim, seed).generate().unwrap();
        prop_assert!(prob.p.is_upper_triangular());
        prop_assert!(prob.check_bounds().is_ok());
        prop_assert!(prob.p.values().iter().chain(prob.a.values()).chain(&prob.q).all(|v| v.is_finite()));
        // every variable's diagonal of P is nonnegative
        for (i, j, v) in prob.p.iter() {
            if i == j {
                prop_assert!(v >= 0.0);
            }
        }
        let (n, m) = (prob.n(), prob.m());
        match class {
            ProblemClass::RandomQp => {
                prop_assert_eq!((n, m), (dim, 10 * dim));
                prop_assert!(prob.l.iter().zip(&prob.u).all(|(l, u)| *l <= 0.0 && 0.0 <= *u));
            }
            ProblemClass::EqQp => {
                prop_assert_eq!((n, m), (dim, dim / 2));
                prop_assert_eq!(&prob.l, &prob.u);
            }
            ProblemClass::OptimalControl => {
                let nu = (dim / 2).max(1);
                prop_assert_eq!(n, dim * (CONTROL_HORIZON + 1) + nu * CONTROL_HORIZON);
            }
            ProblemClass::Portfolio => {
                prop_assert_eq!((n, m), (101 * dim, 101 * dim + 1));
            }
            ProblemClass::Lasso | ProblemClass::Huber | ProblemClass::Svm => {
                prop_assert!(m >= 100 * dim);
            }
        }
    }

    #[test]
    fn control_models_are_stable_with_a_riccati_terminal_cost(nx in 1..=6usize, seed in any::<u64>()) {
        let nu = (nx / 2).max(1);
        let model = control_model(nx, nu, seed).unwrap();
        prop_assert!(spectral_radius(&model.a) < 1.0);
        let res = dare_residual(&model.a, &model.b, &model.q, &model.r, &model.q_terminal);
        prop_assert!(res <= 1e-8 * model.q_terminal.amax().max(1.0), "residual {}", res);
        for (x, b) in model.x_init.iter().zip(&model.x_bar) {
            prop_assert!(x.abs() <= *b);
        }
    }
}

#[test]
fn zero_dimension_is_rejected() {
    for class in ProblemClass::ALL {
        assert!(GenSpec::new(class, 0, 0).generate().is_err(), "{class}");
    }
}
