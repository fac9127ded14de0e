//! ADMM solver for convex quadratic programs `min ½xᵀPx + qᵀx` subject to
//! `l ≤ Ax ≤ u`.
//!
//! ```
//! use splitqp::problem::ProblemData;
//! use splitqp::solver::{solve, Settings, Status};
//! use splitqp::sparse::CscMatrix;
//!
//! let p = CscMatrix::from_dense(2, 2, &[4.0, 1.0, 0.0, 2.0]); // upper triangle of P
//! let a = CscMatrix::from_dense(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
//! let prob = ProblemData::new(p, vec![1.0, 1.0], a, vec![1.0, 0.0, 0.0], vec![1.0, 0.7, 0.7])?;
//!
//! let res = solve(prob, Settings::default())?;
//! assert_eq!(res.status, Status::Solved);
//! let x = res.solution.unwrap().x;
//! assert!((x[0] - 0.3).abs() < 1e-6 && (x[1] - 0.7).abs() < 1e-6);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod bench;
pub mod linsys;
pub mod polish;
pub mod probgen;
pub mod problem;
pub mod qpio;
pub mod scaling;
pub mod solver;
pub mod sparse;
pub mod vector;
