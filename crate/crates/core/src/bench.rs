//! Benchmark harness: external validation of solver output, corpus runs with
//! capped failure times, per-class aggregation, and parametric warm-start
//! experiments.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probgen::{control_model, control_problem, lasso_data, lasso_problem, portfolio, GenError, CONTROL_HORIZON};
use crate::problem::ProblemData;
use crate::solver::termination::{dual_certificate_holds, primal_certificate_holds};
use crate::solver::{Settings, Solution, SolveResult, Solver, SolverError, Status};
use crate::vector::{inf_norm, project_box};

/// Time charged to an instance the solver fails on, in seconds.
pub const FAILURE_TIME_CAP: f64 = 1000.0;

/// Runs shorter than this are repeated and the median time is kept.
pub const REPEAT_BELOW: f64 = 0.01;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("shifted geometric mean of an empty set")]
    Empty,
    #[error("time {value} at index {index} is negative or not a number")]
    BadTime { index: usize, value: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `exp(mean(ln(t + shift))) - shift`, evaluated in log space.
pub fn shifted_geometric_mean(times: &[f64], shift: f64) -> Result<f64, BenchError> {
    if times.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut log_sum = 0.0;
    for (index, &value) in times.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(BenchError::BadTime { index, value });
        }
        log_sum += (value + shift).ln();
    }
    Ok((log_sum / times.len() as f64).exp() - shift)
}

/// Each mean divided by the smallest one, so the fastest entry maps to 1.
pub fn normalize_to_fastest(means: &[f64]) -> Vec<f64> {
    let best = means.iter().copied().fold(f64::INFINITY, f64::min);
    means.iter().map(|g| g / best).collect()
}

/// Outcome of validating a reported point against the original data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCheck {
    /// `||(Ax - u)₊ + (Ax - l)₋||∞`
    pub prim_violation: f64,
    pub eps_prim: f64,
    /// `||Px + q + Aᵀy||∞`
    pub dual_res: f64,
    pub eps_dual: f64,
}

impl OptimalityCheck {
    pub fn passed(&self) -> bool {
        self.prim_violation <= self.eps_prim && self.dual_res <= self.eps_dual
    }
}

/// Validates `(x, y, z)` without any solver state. The primal tolerance is
/// `eps_abs + eps_rel max(||Ax||, ||z||)` and the dual tolerance is
/// `eps_abs + eps_rel max(||Px||, ||Aᵀy||, ||q||)`.
pub fn check_optimality(prob: &ProblemData, sol: &Solution, eps_abs: f64, eps_rel: f64) -> OptimalityCheck {
    let (n, m) = (prob.n(), prob.m());
    if sol.x.len() != n || sol.y.len() != m || sol.z.len() != m {
        return OptimalityCheck {
            prim_violation: f64::INFINITY,
            eps_prim: 0.0,
            dual_res: f64::INFINITY,
            eps_dual: 0.0,
        };
    }
    let mut ax = vec![0.0; m];
    prob.a.mul_vec_into(&sol.x, &mut ax, false);
    let violation: Vec<f64> = (0..m).map(|i| ax[i] - project_box(ax[i], prob.l[i], prob.u[i])).collect();

    let mut px = vec![0.0; n];
    prob.p.sym_upper_mul_vec_into(&sol.x, &mut px);
    let mut aty = vec![0.0; n];
    prob.a.mul_vec_into(&sol.y, &mut aty, true);
    let rd: Vec<f64> = (0..n).map(|j| px[j] + prob.q[j] + aty[j]).collect();

    let nan_to_inf = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    OptimalityCheck {
        prim_violation: nan_to_inf(inf_norm(&violation)),
        eps_prim: eps_abs + eps_rel * inf_norm(&ax).max(inf_norm(&sol.z)),
        dual_res: nan_to_inf(inf_norm(&rd)),
        eps_dual: eps_abs + eps_rel * inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&prob.q)),
    }
}

/// Whether `result` is a correct answer for `prob` under `settings`:
/// solved points pass [`check_optimality`] and infeasibility certificates
/// satisfy their conditions. A primal infeasibility verdict caused by a row
/// with `l > u` carries no certificate and is accepted when that row is
/// indeed inconsistent.
pub fn validate(prob: &ProblemData, result: &SolveResult, settings: &Settings) -> bool {
    match (result.status, &result.certificate) {
        (Status::Solved, _) => result
            .solution
            .as_ref()
            .is_some_and(|s| check_optimality(prob, s, settings.eps_abs, settings.eps_rel).passed()),
        (Status::PrimalInfeasible, Some(dy)) => {
            dy.len() == prob.m() && primal_certificate_holds(prob, dy, settings.eps_pinf)
        }
        (Status::PrimalInfeasible, None) => {
            result.inconsistent_row.is_some_and(|r| r < prob.m() && prob.l[r] > prob.u[r])
        }
        (Status::DualInfeasible, Some(dx)) => {
            dx.len() == prob.n() && dual_certificate_holds(prob, dx, settings.eps_dinf)
        }
        _ => false,
    }
}

/// One benchmark instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub name: String,
    pub class: String,
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    /// `None` when setup itself failed.
    pub status: Option<Status>,
    pub validated: bool,
    pub failed: bool,
    /// Median total seconds; the configured cap on failure.
    pub time: f64,
    pub setup_time: f64,
    pub solve_time: f64,
    pub polish_time: f64,
    pub iterations: usize,
    pub rho_updates: usize,
    pub polish_accepted: bool,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub settings: Settings,
    /// Number of runs for instances faster than [`REPEAT_BELOW`].
    pub repeat: usize,
    pub time_cap: f64,
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { settings: Settings::default(), repeat: 5, time_cap: FAILURE_TIME_CAP, threads: 1 }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Solves one instance, repeating fast runs, and validates the answer.
pub fn bench_instance(name: &str, class: &str, prob: &ProblemData, cfg: &BenchConfig) -> InstanceRecord {
    let mut record = InstanceRecord {
        name: name.to_string(),
        class: class.to_string(),
        n: prob.n(),
        m: prob.m(),
        nnz: prob.nnz(),
        status: None,
        validated: false,
        failed: true,
        time: cfg.time_cap,
        setup_time: 0.0,
        solve_time: 0.0,
        polish_time: 0.0,
        iterations: 0,
        rho_updates: 0,
        polish_accepted: false,
    };
    let settings = Settings { time_limit: cfg.settings.time_limit.or(Some(cfg.time_cap)), ..cfg.settings.clone() };
    let run = || -> Result<SolveResult, SolverError> { Ok(Solver::setup(prob.clone(), settings.clone())?.solve()) };
    let first = match run() {
        Ok(r) => r,
        Err(e) => {
            log::warn!("{name}: {e}");
            return record;
        }
    };
    let mut totals = vec![first.timings.total()];
    let mut parts = vec![first.timings];
    if first.timings.total() < REPEAT_BELOW {
        for _ in 1..cfg.repeat.max(1) {
            if let Ok(r) = run() {
                totals.push(r.timings.total());
                parts.push(r.timings);
            }
        }
    }
    let pick = |f: fn(&crate::solver::Timings) -> f64| median(&mut parts.iter().map(f).collect::<Vec<_>>());

    record.status = Some(first.status);
    record.validated = validate(prob, &first, &settings);
    record.failed = !record.validated;
    let total = median(&mut totals);
    record.time = if record.failed { cfg.time_cap } else { total.min(cfg.time_cap) };
    record.setup_time = pick(|t| t.setup);
    record.solve_time = pick(|t| t.solve);
    record.polish_time = pick(|t| t.polish);
    record.iterations = first.iterations;
    record.rho_updates = first.rho_updates;
    record.polish_accepted = first.polish_succeeded();
    record
}

/// Runs every instance on a pool of `cfg.threads` workers. Output order
/// follows input order.
pub fn bench_corpus(instances: &[(String, String, ProblemData)], cfg: &BenchConfig) -> Vec<InstanceRecord> {
    use rayon::prelude::*;
    let job = |(name, class, prob): &(String, String, ProblemData)| bench_instance(name, class, prob, cfg);
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads.max(1)).build() {
        Ok(pool) => pool.install(|| instances.par_iter().map(job).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running serially");
            instances.iter().map(job).collect()
        }
    }
}

/// Per-class statistics over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub instances: usize,
    pub failures: usize,
    /// Shifted geometric mean of capped total times, shift 1 s.
    pub sgm_time: f64,
    pub median_iterations: f64,
    pub setup_fraction: f64,
    pub solve_fraction: f64,
    pub polish_fraction: f64,
    /// Fraction of solved instances whose polish step was accepted.
    pub polish_success: f64,
    pub mean_rho_updates: f64,
    pub max_rho_updates: usize,
}

/// Groups records by class (sorted by name) and appends an `all` row.
pub fn summarize(records: &[InstanceRecord]) -> Vec<ClassSummary> {
    let mut groups: BTreeMap<&str, Vec<&InstanceRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.class.as_str()).or_default().push(r);
    }
    let mut out: Vec<ClassSummary> = groups.into_iter().map(|(c, rs)| summarize_group(c, &rs)).collect();
    if !records.is_empty() {
        out.push(summarize_group("all", &records.iter().collect::<Vec<_>>()));
    }
    out
}

fn summarize_group(class: &str, rs: &[&InstanceRecord]) -> ClassSummary {
    let k = rs.len() as f64;
    let times: Vec<f64> = rs.iter().map(|r| r.time).collect();
    let mut iters: Vec<f64> = rs.iter().map(|r| r.iterations as f64).collect();
    let mut fractions = [0.0; 3];
    for r in rs {
        let total = r.setup_time + r.solve_time + r.polish_time;
        if total > 0.0 {
            fractions[0] += r.setup_time / total / k;
            fractions[1] += r.solve_time / total / k;
            fractions[2] += r.polish_time / total / k;
        }
    }
    let solved: Vec<_> = rs.iter().filter(|r| r.status == Some(Status::Solved)).collect();
    let polish_success = if solved.is_empty() {
        0.0
    } else {
        solved.iter().filter(|r| r.polish_accepted).count() as f64 / solved.len() as f64
    };
    ClassSummary {
        class: class.to_string(),
        instances: rs.len(),
        failures: rs.iter().filter(|r| r.failed).count(),
        sgm_time: shifted_geometric_mean(&times, 1.0).unwrap_or(0.0),
        median_iterations: if iters.is_empty() { 0.0 } else { median(&mut iters) },
        setup_fraction: fractions[0],
        solve_fraction: fractions[1],
        polish_fraction: fractions[2],
        polish_success,
        mean_rho_updates: rs.iter().map(|r| r.rho_updates as f64).sum::<f64>() / k,
        max_rho_updates: rs.iter().map(|r| r.rho_updates).max().unwrap_or(0),
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text rendering of [`summarize`] output.
pub fn format_summary(rows: &[ClassSummary]) -> String {
    let mut s = format!(
        "{:<16} {:>5} {:>5} {:>11} {:>8} {:>7} {:>7} {:>7} {:>8} {:>8} {:>6}\n",
        "class", "inst", "fail", "sgm time[s]", "iters", "setup%", "solve%", "polish%", "polish ok", "rho upd", "max"
    );
    for r in rows {
        s += &format!(
            "{:<16} {:>5} {:>5} {:>11.3e} {:>8.0} {:>7.1} {:>7.1} {:>7.1} {:>8.1}% {:>8.2} {:>6}\n",
            r.class,
            r.instances,
            r.failures,
            r.sgm_time,
            r.median_iterations,
            100.0 * r.setup_fraction,
            100.0 * r.solve_fraction,
            100.0 * r.polish_fraction,
            100.0 * r.polish_success,
            r.mean_rho_updates,
            r.max_rho_updates,
        );
    }
    s
}

/// Replacement vectors for one step of a parametric sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorUpdate {
    pub q: Option<Vec<f64>>,
    pub l: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
}

impl VectorUpdate {
    fn apply_to(&self, prob: &mut ProblemData) {
        if let Some(q) = &self.q {
            prob.q.clone_from(q);
        }
        if let Some(l) = &self.l {
            prob.l = l.iter().map(|v| crate::sparse::normalize_bound(*v)).collect();
        }
        if let Some(u) = &self.u {
            prob.u = u.iter().map(|v| crate::sparse::normalize_bound(*v)).collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub status: Status,
    pub iterations: usize,
    pub rho_updates: usize,
    /// Wall-clock seconds for the update (or setup) plus the solve.
    pub time: f64,
    /// Numeric factorizations performed while applying the update.
    pub update_factorizations: usize,
    /// Numeric factorizations performed during the solve.
    pub solve_factorizations: usize,
    pub symbolic_factorizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub warm: bool,
    pub steps: Vec<StepRecord>,
}

impl SequenceReport {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.steps.iter().map(|s| s.time).sum()
    }
}

/// Solves a sequence of problems that differ only in `q`, `l`, `u`.
///
/// `next(k, prev)` returns the update for step `k` given the solution of
/// step `k - 1`. With `warm` set, one solver is kept across steps: its
/// factorization is reused and each solve starts from the previous iterates.
/// Otherwise every step is set up from scratch and started at zero.
pub fn run_sequence(
    base: &ProblemData,
    settings: &Settings,
    steps: usize,
    warm: bool,
    mut next: impl FnMut(usize, Option<&Solution>) -> VectorUpdate,
) -> Result<SequenceReport, BenchError> {
    let mut records = Vec::with_capacity(steps);
    let mut current = base.clone();
    let mut solver: Option<Solver> = None;
    let mut prev: Option<Solution> = None;
    for k in 0..steps {
        let update = next(k, prev.as_ref());
        let start = Instant::now();
        let (result, update_factorizations, solve_factorizations, symbolic) = if warm {
            let s = match solver.as_mut() {
                Some(s) => s,
                None => {
                    update.apply_to(&mut current);
                    solver.insert(Solver::setup(current.clone(), settings.clone())?)
                }
            };
            let before = s.linsys_stats();
            if k > 0 {
                s.update_vectors(update.q.as_deref(), update.l.as_deref(), update.u.as_deref())?;
            }
            let mid = s.linsys_stats();
            let result = s.solve();
            let after = s.linsys_stats();
            (
                result,
                mid.numeric_factorizations - before.numeric_factorizations,
                after.numeric_factorizations - mid.numeric_factorizations,
                after.symbolic_factorizations - before.symbolic_factorizations,
            )
        } else {
            update.apply_to(&mut current);
            let mut s = Solver::setup(current.clone(), settings.clone())?;
            let before = s.linsys_stats();
            let result = s.solve();
            let after = s.linsys_stats();
            (
                result,
                before.numeric_factorizations,
                after.numeric_factorizations - before.numeric_factorizations,
                after.symbolic_factorizations,
            )
        };
        records.push(StepRecord {
            status: result.status,
            iterations: result.iterations,
            rho_updates: result.rho_updates,
            time: start.elapsed().as_secs_f64(),
            update_factorizations,
            solve_factorizations,
            symbolic_factorizations: symbolic,
        });
        prev = result.solution;
    }
    Ok(SequenceReport { warm, steps: records })
}

/// `count` values spaced evenly in log scale from `hi` down to `lo`.
pub fn log_space_desc(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

/// Parametric families for the warm-start experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Lasso regularization path from the critical weight down by 100×.
    Lasso,
    /// Portfolio with risk aversion swept over `[1e-2, 1e2]`.
    Portfolio,
    /// Closed-loop model predictive control.
    Control,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Lasso, Experiment::Portfolio, Experiment::Control];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Lasso => "lasso",
            Experiment::Portfolio => "portfolio",
            Experiment::Control => "control",
        }
    }
}

/// Cold and warm runs of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartComparison {
    pub experiment: Experiment,
    pub cold: SequenceReport,
    pub warm: SequenceReport,
}

impl WarmStartComparison {
    pub fn iteration_ratio(&self) -> f64 {
        self.cold.total_iterations() as f64 / self.warm.total_iterations().max(1) as f64
    }

    pub fn time_ratio(&self) -> f64 {
        self.cold.total_time() / self.warm.total_time().max(f64::MIN_POSITIVE)
    }
}

fn sequence(exp: Experiment, dim: usize, seed: u64, steps: usize, settings: &Settings, warm: bool) -> Result<SequenceReport, BenchError> {
    match exp {
        Experiment::Lasso => {
            let data = lasso_data(dim, 100 * dim, seed)?;
            let lambdas = log_space_desc(2.0 * data.atb_inf_norm(), 0.02 * data.atb_inf_norm(), steps);
            let base = lasso_problem(&data, lambdas[0])?;
            let n = base.n();
            run_sequence(&base, settings, steps, warm, |k, _| {
                let mut q = base.q.clone();
                q[n - dim..].fill(lambdas[k]);
                VectorUpdate { q: Some(q), ..Default::default() }
            })
        }
        Experiment::Portfolio => {
            let base = portfolio(dim, seed)?;
            let gammas = log_space_desc(1e2, 1e-2, steps);
            run_sequence(&base, settings, steps, warm, |k, _| VectorUpdate {
                q: Some(base.q.iter().map(|v| v / gammas[k]).collect()),
                ..Default::default()
            })
        }
        Experiment::Control => {
            let model = control_model(dim, (dim / 2).max(1), seed)?;
            let base = control_problem(&model, CONTROL_HORIZON)?;
            let (nx, nu) = (dim, model.b.ncols());
            let mut state: Vec<f64> = model.x_init.to_vec();
            run_sequence(&base, settings, steps, warm, |k, prev| {
                if k > 0 {
                    // advance the plant with the first planned input
                    let u0: Vec<f64> = match prev {
                        Some(sol) => sol.x[nx * (CONTROL_HORIZON + 1)..][..nu].to_vec(),
                        None => vec![0.0; nu],
                    };
                    state = (0..nx)
                        .map(|i| {
                            (0..nx).map(|j| model.a[(i, j)] * state[j]).sum::<f64>()
                                + (0..nu).map(|j| model.b[(i, j)] * u0[j]).sum::<f64>()
                        })
                        .collect();
                }
                let mut l = base.l.clone();
                let mut u = base.u.clone();
                l[..nx].copy_from_slice(&state);
                u[..nx].copy_from_slice(&state);
                VectorUpdate { q: None, l: Some(l), u: Some(u) }
            })
        }
    }
}

/// Runs `exp` cold and warm over `steps` parameter values.
pub fn warm_start_experiment(
    exp: Experiment,
    dim: usize,
    seed: u64,
    steps: usize,
    settings: &Settings,
) -> Result<WarmStartComparison, BenchError> {
    Ok(WarmStartComparison {
        experiment: exp,
        cold: sequence(exp, dim, seed, steps, settings, false)?,
        warm: sequence(exp, dim, seed, steps, settings, true)?,
    })
}
