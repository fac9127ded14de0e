use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    SolvedInaccurate,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterReached,
    TimeLimitReached,
    NumericalError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::SolvedInaccurate => "solved_inaccurate",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::MaxIterReached => "max_iter_reached",
            Status::TimeLimitReached => "time_limit_reached",
            Status::NumericalError => "numerical_error",
        }
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Status::PrimalInfeasible | Status::DualInfeasible)
    }

    /// Statuses that come with a primal-dual point.
    pub fn has_solution(self) -> bool {
        matches!(
            self,
            Status::Solved | Status::SolvedInaccurate | Status::MaxIterReached | Status::TimeLimitReached
        )
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unscaled primal-dual point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolishOutcome {
    NotRun,
    Accepted,
    Rejected,
}

/// Seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub solve: f64,
    pub polish: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.setup + self.solve + self.polish
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    /// Present for [`Status::has_solution`] statuses.
    pub solution: Option<Solution>,
    /// `δy` for primal infeasibility, `δx` for dual infeasibility, unscaled.
    pub certificate: Option<Vec<f64>>,
    /// Row whose bounds satisfy `l > u`, when that was detected at setup.
    pub inconsistent_row: Option<usize>,
    pub objective: Option<f64>,
    pub prim_res: f64,
    pub dual_res: f64,
    pub iterations: usize,
    pub rho_updates: usize,
    /// Final `rho` scalar.
    pub rho: f64,
    pub polish: PolishOutcome,
    pub timings: Timings,
}

impl SolveResult {
    pub fn polish_succeeded(&self) -> bool {
        self.polish == PolishOutcome::Accepted
    }
}
