//! Seeded problem generators and a dense reference solver.
//!
//! A [`GenSpec`] fully determines the generated [`ProblemData`]: the same
//! spec always yields bit-identical matrices and vectors.

mod classes;
pub mod dare;
pub mod oracle;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classes::{
    control_model, control_problem, eq_qp, huber, huber_with, lasso, lasso_cost, lasso_data, lasso_problem,
    lasso_with, optimal_control, optimal_control_with, portfolio, portfolio_with, random_qp, spectral_radius, svm,
    svm_with, ControlModel, RegressionData, CONTROL_HORIZON,
};
pub use oracle::{dense_reference_solve, OracleError, ReferenceSolution};

use crate::problem::{ProblemData, ProblemError};
use crate::sparse::SparseError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("{class} needs dimension >= {min}, got {dim}")]
    Dimension { class: &'static str, dim: usize, min: usize },
    #[error("Riccati iteration for the terminal cost did not converge")]
    Riccati,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl From<SparseError> for GenError {
    fn from(e: SparseError) -> Self {
        GenError::Problem(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemClass {
    RandomQp,
    EqQp,
    OptimalControl,
    Portfolio,
    Lasso,
    Huber,
    Svm,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 7] = [
        ProblemClass::RandomQp,
        ProblemClass::EqQp,
        ProblemClass::OptimalControl,
        ProblemClass::Portfolio,
        ProblemClass::Lasso,
        ProblemClass::Huber,
        ProblemClass::Svm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemClass::RandomQp => "random_qp",
            ProblemClass::EqQp => "eq_qp",
            ProblemClass::OptimalControl => "optimal_control",
            ProblemClass::Portfolio => "portfolio",
            ProblemClass::Lasso => "lasso",
            ProblemClass::Huber => "huber",
            ProblemClass::Svm => "svm",
        }
    }
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown problem class `{0}`")]
pub struct UnknownClass(pub String);

impl FromStr for ProblemClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

/// Class, leading dimension and seed of a generated instance. The leading
/// dimension is `n` for the random, equality, lasso, Huber and SVM classes,
/// the state count for optimal control and the factor count for portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenSpec {
    pub class: ProblemClass,
    pub dim: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(class: ProblemClass, dim: usize, seed: u64) -> Self {
        Self { class, dim, seed }
    }

    pub fn name(&self) -> String {
        format!("{}_{}_{}", self.class, self.dim, self.seed)
    }

    pub fn generate(&self) -> Result<ProblemData, GenError> {
        generate(self)
    }
}

pub fn generate(spec: &GenSpec) -> Result<ProblemData, GenError> {
    let (n, seed) = (spec.dim, spec.seed);
    match spec.class {
        ProblemClass::RandomQp => random_qp(n, seed),
        ProblemClass::EqQp => eq_qp(n, seed),
        ProblemClass::OptimalControl => optimal_control(n, seed),
        ProblemClass::Portfolio => portfolio(n, seed),
        ProblemClass::Lasso => lasso(n, seed),
        ProblemClass::Huber => huber(n, seed),
        ProblemClass::Svm => svm(n, seed),
    }
}

/// Instance of `class` small enough for [`dense_reference_solve`]:
///
/// | class | size |
/// |---|---|
/// | random_qp | n = 2, m = 20 |
/// | eq_qp | n = 12, m = 6 |
/// | optimal_control | n_x = 2, n_u = 1, horizon 2 |
/// | portfolio | k = 1, 8 assets |
/// | lasso | 3 features, 6 data points |
/// | huber | 2 features, 3 data points |
/// | svm | 2 features, 6 data points |
pub fn oracle_instance(class: ProblemClass, seed: u64) -> Result<ProblemData, GenError> {
    match class {
        ProblemClass::RandomQp => random_qp(2, seed),
        ProblemClass::EqQp => eq_qp(12, seed),
        ProblemClass::OptimalControl => optimal_control_with(2, 1, 2, seed),
        ProblemClass::Portfolio => portfolio_with(1, 8, seed),
        ProblemClass::Lasso => lasso_with(3, 6, seed),
        ProblemClass::Huber => huber_with(2, 3, seed, true),
        ProblemClass::Svm => svm_with(2, 6, seed),
    }
}
