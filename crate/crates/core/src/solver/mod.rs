//! The ADMM engine: iteration, termination, infeasibility detection,
//! adaptive `rho`, warm starting, and parametric updates that reuse the
//! cached factorization.

mod result;
mod settings;
pub mod termination;

use std::time::Instant;

use thiserror::Error;

use crate::linsys::{Backend, CgOptions, LinearSystem, LinsysError, LinsysStats};
use crate::polish::{guess_active_sets, polish};
use crate::problem::{ProblemData, ProblemError};
use crate::scaling::{ruiz_equilibrate, scale_bound, ScalingResult};
use crate::sparse::normalize_bound;
use crate::vector::project_box;

pub use result::{PolishOutcome, Solution, SolveResult, Status, Timings};
pub use settings::{RhoGate, Settings, RHO_MAX, RHO_MIN};
use termination::{check_dual_infeasible, check_primal_infeasible, residual_info, ResidualInfo, ScalingView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linsys(#[from] LinsysError),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Row `i` is treated as an equality when `u - l <= 1e-12 max(1, |l|, |u|)`.
pub fn is_equality_row(l: f64, u: f64) -> bool {
    l.is_finite() && u.is_finite() && u - l <= 1e-12 * 1f64.max(l.abs()).max(u.abs())
}

fn view(s: &ScalingResult) -> ScalingView<'_> {
    ScalingView { d: &s.d, dinv: &s.dinv, e: &s.e, einv: &s.einv, c: s.c }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<(), SolverError> {
    if got == want {
        Ok(())
    } else {
        Err(SolverError::Dimension(format!("{name} has length {got}, expected {want}")))
    }
}

/// Solver state for one problem. Iterates are kept in scaled form.
#[derive(Debug, Clone)]
pub struct Solver {
    settings: Settings,
    problem: ProblemData,
    scaling: ScalingResult,
    linsys: LinearSystem,
    rho_bar: f64,
    rho: Vec<f64>,
    is_equality: Vec<bool>,
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    x_tilde: Vec<f64>,
    z_tilde: Vec<f64>,
    nu: Vec<f64>,
    x_prev: Vec<f64>,
    y_prev: Vec<f64>,
    rho_updates: usize,
    work_since_factor: f64,
    time_since_factor: f64,
    last_factor_time: f64,
    setup_time: f64,
    inconsistent_row: Option<usize>,
}

impl Solver {
    /// Scales the data, builds `rho`, and factors the KKT matrix. A row with
    /// `l > u` is recorded and makes [`Solver::solve`] report primal
    /// infeasibility.
    pub fn setup(problem: ProblemData, settings: Settings) -> Result<Self, SolverError> {
        settings.validate().map_err(SolverError::InvalidSettings)?;
        let start = Instant::now();
        let (n, m) = (problem.n(), problem.m());
        let inconsistent_row = problem.inconsistent_row();
        let scaling = ruiz_equilibrate(&problem, settings.scaling_eps, settings.scaling_iters);
        let is_equality: Vec<bool> =
            problem.l.iter().zip(&problem.u).map(|(l, u)| is_equality_row(*l, *u)).collect();
        let rho_bar = settings.rho.clamp(RHO_MIN, RHO_MAX);
        let rho = build_rho(rho_bar, &is_equality, settings.equality_rho_multiplier);

        let factor_start = Instant::now();
        let linsys = match settings.linsys_backend {
            Backend::Direct => LinearSystem::new_direct(
                &scaling.scaled.p,
                &scaling.scaled.a,
                settings.sigma,
                &rho,
                settings.ordering,
            )?,
            Backend::Indirect => LinearSystem::new_indirect(
                &scaling.scaled.p,
                &scaling.scaled.a,
                settings.sigma,
                &rho,
                CgOptions { tol: settings.cg_tol, max_iter: settings.cg_max_iter },
            )?,
        };
        let last_factor_time = factor_start.elapsed().as_secs_f64();

        Ok(Self {
            settings,
            problem,
            scaling,
            linsys,
            rho_bar,
            rho,
            is_equality,
            x: vec![0.0; n],
            z: vec![0.0; m],
            y: vec![0.0; m],
            x_tilde: vec![0.0; n],
            z_tilde: vec![0.0; m],
            nu: vec![0.0; m],
            x_prev: vec![0.0; n],
            y_prev: vec![0.0; m],
            rho_updates: 0,
            work_since_factor: 0.0,
            time_since_factor: 0.0,
            last_factor_time,
            setup_time: start.elapsed().as_secs_f64(),
            inconsistent_row,
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Changes settings that do not affect the factorization.
    pub fn update_settings(&mut self, f: impl FnOnce(&mut Settings)) -> Result<(), SolverError> {
        let mut s = self.settings.clone();
        f(&mut s);
        s.validate().map_err(SolverError::InvalidSettings)?;
        let fixed = |t: &Settings| {
            (t.sigma, t.linsys_backend, t.ordering, t.scaling_iters, t.scaling_eps, t.equality_rho_multiplier)
        };
        if fixed(&s) != fixed(&self.settings) {
            return Err(SolverError::InvalidSettings(
                "sigma, backend, ordering, scaling and equality multiplier are fixed at setup".into(),
            ));
        }
        self.settings = s;
        Ok(())
    }

    pub fn problem(&self) -> &ProblemData {
        &self.problem
    }

    pub fn scaling(&self) -> &ScalingResult {
        &self.scaling
    }

    pub fn linsys_stats(&self) -> LinsysStats {
        self.linsys.stats()
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    pub fn rho_vector(&self) -> &[f64] {
        &self.rho
    }

    /// `sigma` in use; differs from the setting after a zero-pivot retry.
    pub fn sigma(&self) -> f64 {
        self.linsys.sigma()
    }

    pub fn is_equality(&self) -> &[bool] {
        &self.is_equality
    }

    /// Scaled `(x, z, y)`.
    pub fn iterates(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.x, &self.z, &self.y)
    }

    /// Scaled `(x_tilde, z_tilde, nu)` from the latest linear solve.
    pub fn intermediates(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.x_tilde, &self.z_tilde, &self.nu)
    }

    /// Overwrites the scaled iterates.
    pub fn set_iterates(&mut self, x: &[f64], z: &[f64], y: &[f64]) -> Result<(), SolverError> {
        check_len("x", x.len(), self.x.len())?;
        check_len("z", z.len(), self.z.len())?;
        check_len("y", y.len(), self.y.len())?;
        self.x.copy_from_slice(x);
        self.z.copy_from_slice(z);
        self.y.copy_from_slice(y);
        self.x_prev.copy_from_slice(x);
        self.y_prev.copy_from_slice(y);
        Ok(())
    }

    /// Zeroes all iterates; `rho` is kept.
    pub fn reset_iterates(&mut self) {
        for v in [&mut self.x, &mut self.z, &mut self.y, &mut self.x_prev, &mut self.y_prev] {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
    }

    /// Starts the next solve from the unscaled guess `(x, Ax, y)`.
    pub fn warm_start(&mut self, x: &[f64], y: &[f64]) -> Result<(), SolverError> {
        check_len("x", x.len(), self.problem.n())?;
        check_len("y", y.len(), self.problem.m())?;
        let mut ax = vec![0.0; self.problem.m()];
        self.problem.a.mul_vec_into(x, &mut ax, false);
        let xs = self.scaling.scale_x(x);
        let zs = self.scaling.scale_z(&ax);
        let ys = self.scaling.scale_y(y);
        self.set_iterates(&xs, &zs, &ys)
    }

    /// Residuals of the current iterates, measured on the original problem.
    pub fn residuals(&self) -> ResidualInfo {
        residual_info(
            &self.scaling.scaled,
            view(&self.scaling),
            &self.x,
            &self.y,
            &self.z,
            self.settings.eps_abs,
            self.settings.eps_rel,
        )
    }

    /// One ADMM iteration on the scaled problem.
    pub fn admm_iterate(&mut self) -> Result<(), SolverError> {
        let alpha = self.settings.alpha;
        let scaled = &self.scaling.scaled;
        self.linsys.solve(
            &self.x,
            &self.z,
            &self.y,
            &scaled.q,
            &scaled.a,
            &mut self.x_tilde,
            &mut self.z_tilde,
            &mut self.nu,
        )?;
        std::mem::swap(&mut self.x, &mut self.x_prev);
        self.y_prev.copy_from_slice(&self.y);
        for j in 0..self.x.len() {
            self.x[j] = alpha * self.x_tilde[j] + (1.0 - alpha) * self.x_prev[j];
        }
        for i in 0..self.z.len() {
            let relaxed = alpha * self.z_tilde[i] + (1.0 - alpha) * self.z[i];
            let v = relaxed + self.y[i] / self.rho[i];
            let z_new = project_box(v, scaled.l[i], scaled.u[i]);
            self.y[i] = self.rho[i] * (v - z_new);
            self.z[i] = z_new;
        }
        self.work_since_factor += self.linsys.last_solve_work();
        Ok(())
    }

    /// `x^k - x^{k-1}` in scaled form.
    pub fn delta_x(&self) -> Vec<f64> {
        self.x.iter().zip(&self.x_prev).map(|(a, b)| a - b).collect()
    }

    /// `y^k - y^{k-1}` in scaled form.
    pub fn delta_y(&self) -> Vec<f64> {
        self.y.iter().zip(&self.y_prev).map(|(a, b)| a - b).collect()
    }

    /// Termination status of the current iterates, if any.
    pub fn check_termination(&self, info: &ResidualInfo) -> Option<Status> {
        if info.converged() {
            return Some(Status::Solved);
        }
        let sv = view(&self.scaling);
        if self.problem.m() > 0
            && check_primal_infeasible(&self.scaling.scaled, sv, &self.delta_y(), self.settings.eps_pinf)
        {
            return Some(Status::PrimalInfeasible);
        }
        if check_dual_infeasible(&self.scaling.scaled, sv, &self.delta_x(), self.settings.eps_dinf) {
            return Some(Status::DualInfeasible);
        }
        None
    }

    /// Candidate `rho` from the scaled residual ratio, or `None` when the
    /// ratio is undefined.
    pub fn rho_candidate(&self, info: &ResidualInfo) -> Option<f64> {
        let (p, d) = (info.scaled_prim_ratio?, info.scaled_dual_ratio?);
        if !(d > 0.0) {
            return None;
        }
        Some((self.rho_bar * (p / d).sqrt()).clamp(RHO_MIN, RHO_MAX))
    }

    fn rho_gate_open(&self) -> bool {
        let frac = self.settings.adaptive_rho_time_fraction;
        match (self.linsys.backend(), self.settings.adaptive_rho_gate) {
            (Backend::Indirect, _) => true,
            (Backend::Direct, RhoGate::Work) => self.work_since_factor > frac * self.linsys.factor_work(),
            (Backend::Direct, RhoGate::WallClock) => self.time_since_factor > frac * self.last_factor_time,
        }
    }

    /// Applies the adaptive rule; returns whether `rho` changed.
    pub fn adapt_rho(&mut self, info: &ResidualInfo) -> Result<bool, SolverError> {
        if self.problem.m() == 0 || self.rho_updates >= self.settings.adaptive_rho_max_updates {
            return Ok(false);
        }
        let Some(candidate) = self.rho_candidate(info) else {
            return Ok(false);
        };
        let f = self.settings.adaptive_rho_change_factor;
        let big_change = candidate >= f * self.rho_bar || candidate <= self.rho_bar / f;
        if !big_change || !self.rho_gate_open() {
            return Ok(false);
        }
        self.set_rho_bar(candidate)?;
        self.rho_updates += 1;
        Ok(true)
    }

    /// Sets the scalar `rho` and refactors.
    pub fn set_rho_bar(&mut self, rho_bar: f64) -> Result<(), SolverError> {
        self.rho_bar = rho_bar.clamp(RHO_MIN, RHO_MAX);
        self.rho = build_rho(self.rho_bar, &self.is_equality, self.settings.equality_rho_multiplier);
        self.refactor_rho()
    }

    fn refactor_rho(&mut self) -> Result<(), SolverError> {
        let start = Instant::now();
        self.linsys.update_rho(&self.rho)?;
        self.last_factor_time = start.elapsed().as_secs_f64();
        self.work_since_factor = 0.0;
        self.time_since_factor = 0.0;
        Ok(())
    }

    /// Replaces any of `q`, `l`, `u` (unscaled). The factorization is reused
    /// unless the set of equality rows changes.
    pub fn update_vectors(
        &mut self,
        q: Option<&[f64]>,
        l: Option<&[f64]>,
        u: Option<&[f64]>,
    ) -> Result<(), SolverError> {
        let (n, m) = (self.problem.n(), self.problem.m());
        if let Some(q) = q {
            check_len("q", q.len(), n)?;
            if q.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::NonFinite("q").into());
            }
        }
        if let Some(l) = l {
            check_len("l", l.len(), m)?;
        }
        if let Some(u) = u {
            check_len("u", u.len(), m)?;
        }
        let new_l: Vec<f64> = l.map_or_else(|| self.problem.l.clone(), |v| v.iter().map(|b| normalize_bound(*b)).collect());
        let new_u: Vec<f64> = u.map_or_else(|| self.problem.u.clone(), |v| v.iter().map(|b| normalize_bound(*b)).collect());
        if new_l.iter().chain(&new_u).any(|v| v.is_nan()) {
            return Err(ProblemError::NonFinite("bounds").into());
        }
        if let Some(row) = new_l.iter().zip(&new_u).position(|(a, b)| a > b) {
            return Err(ProblemError::InconsistentBounds { row, lower: new_l[row], upper: new_u[row] }.into());
        }

        if let Some(q) = q {
            self.problem.q = q.to_vec();
            self.scaling.scaled.q = self.scaling.scale_q(q);
        }
        self.scaling.scaled.l = self.scaling.scale_bounds(&new_l);
        self.scaling.scaled.u = self.scaling.scale_bounds(&new_u);
        self.problem.l = new_l;
        self.problem.u = new_u;
        self.inconsistent_row = None;

        let is_equality: Vec<bool> =
            self.problem.l.iter().zip(&self.problem.u).map(|(l, u)| is_equality_row(*l, *u)).collect();
        if is_equality != self.is_equality {
            self.is_equality = is_equality;
            self.rho = build_rho(self.rho_bar, &self.is_equality, self.settings.equality_rho_multiplier);
            self.refactor_rho()?;
        }
        Ok(())
    }

    /// Replaces the values of `P` (upper triangle) and/or `A`, keeping their
    /// sparsity patterns. Only a numeric refactorization is performed.
    pub fn update_matrices(
        &mut self,
        p_values: Option<&[f64]>,
        a_values: Option<&[f64]>,
    ) -> Result<(), SolverError> {
        if let Some(pv) = p_values {
            check_len("P values", pv.len(), self.problem.p.nnz())?;
            if pv.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::NonFinite("P").into());
            }
        }
        if let Some(av) = a_values {
            check_len("A values", av.len(), self.problem.a.nnz())?;
            if av.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::NonFinite("A").into());
            }
        }
        let (x, y, z) = (
            self.scaling.unscale_x(&self.x),
            self.scaling.unscale_y(&self.y),
            self.scaling.unscale_z(&self.z),
        );
        if let Some(pv) = p_values {
            self.problem.p.values_mut().copy_from_slice(pv);
        }
        if let Some(av) = a_values {
            self.problem.a.values_mut().copy_from_slice(av);
        }

        if self.settings.freeze_scaling {
            self.scaling.scaled = rescale_with(&self.scaling, &self.problem);
        } else {
            self.scaling =
                ruiz_equilibrate(&self.problem, self.settings.scaling_eps, self.settings.scaling_iters);
        }
        let (xs, ys, zs) = (self.scaling.scale_x(&x), self.scaling.scale_y(&y), self.scaling.scale_z(&z));
        self.set_iterates(&xs, &zs, &ys)?;

        let start = Instant::now();
        self.linsys.update_matrices(&self.scaling.scaled.p, &self.scaling.scaled.a, &self.rho)?;
        self.last_factor_time = start.elapsed().as_secs_f64();
        self.work_since_factor = 0.0;
        self.time_since_factor = 0.0;
        Ok(())
    }

    /// Runs ADMM from the current iterates until termination.
    pub fn solve(&mut self) -> SolveResult {
        let start = Instant::now();
        self.rho_updates = 0;
        if let Some(row) = self.inconsistent_row {
            return self.finish(Status::PrimalInfeasible, None, 0, start, Some(row));
        }
        let every = self.settings.check_termination_every;
        let max_iter = self.settings.max_iter;
        let wall_gate = self.settings.adaptive_rho_gate == RhoGate::WallClock;
        let mut status = None;
        let mut info = None;
        let mut iter = 0;

        while iter < max_iter {
            iter += 1;
            let it_start = wall_gate.then(Instant::now);
            if let Err(e) = self.admm_iterate() {
                log::warn!("linear system failure: {e}");
                status = Some(Status::NumericalError);
                break;
            }
            if let Some(t) = it_start {
                self.time_since_factor += t.elapsed().as_secs_f64();
            }
            let timed_out = self.settings.time_limit.is_some_and(|tl| start.elapsed().as_secs_f64() > tl);
            if iter % every == 0 || iter == max_iter || timed_out {
                let current = self.residuals();
                if !(current.prim_res.is_finite() && current.dual_res.is_finite()) {
                    status = Some(Status::NumericalError);
                    info = Some(current);
                    break;
                }
                if let Some(s) = self.check_termination(&current) {
                    status = Some(s);
                    info = Some(current);
                    break;
                }
                if timed_out {
                    status = Some(Status::TimeLimitReached);
                    info = Some(current);
                    break;
                }
                if self.settings.adaptive_rho && iter < max_iter {
                    if let Err(e) = self.adapt_rho(&current) {
                        log::warn!("rho update failed: {e}");
                        status = Some(Status::NumericalError);
                        info = Some(current);
                        break;
                    }
                }
                info = Some(current);
            }
        }
        let status = status.unwrap_or_else(|| match &info {
            Some(i) if i.within(10.0) => Status::SolvedInaccurate,
            _ => Status::MaxIterReached,
        });
        self.finish(status, info, iter, start, None)
    }

    fn finish(
        &mut self,
        status: Status,
        info: Option<ResidualInfo>,
        iterations: usize,
        start: Instant,
        inconsistent_row: Option<usize>,
    ) -> SolveResult {
        let info = info.unwrap_or_else(|| self.residuals());
        let solve_time = start.elapsed().as_secs_f64();
        let mut result = SolveResult {
            status,
            solution: None,
            certificate: None,
            inconsistent_row,
            objective: None,
            prim_res: info.prim_res,
            dual_res: info.dual_res,
            iterations,
            rho_updates: self.rho_updates,
            rho: self.rho_bar,
            polish: PolishOutcome::NotRun,
            timings: Timings { setup: self.setup_time, solve: solve_time, polish: 0.0 },
        };
        match status {
            Status::PrimalInfeasible if inconsistent_row.is_none() => {
                let dy = self.delta_y();
                result.certificate = Some(
                    dy.iter().zip(&self.scaling.e).map(|(v, e)| e * v / self.scaling.c).collect(),
                );
            }
            Status::DualInfeasible => {
                let dx = self.delta_x();
                result.certificate = Some(dx.iter().zip(&self.scaling.d).map(|(v, d)| d * v).collect());
            }
            s if s.has_solution() => {
                // unscaling can move a bound-active z by an ulp
                let z = self.scaling.unscale_z(&self.z);
                let z = (0..z.len()).map(|i| project_box(z[i], self.problem.l[i], self.problem.u[i])).collect();
                let mut sol = Solution {
                    x: self.scaling.unscale_x(&self.x),
                    y: self.scaling.unscale_y(&self.y),
                    z,
                };
                if s == Status::Solved && self.settings.polish {
                    let polish_start = Instant::now();
                    let sets = guess_active_sets(&sol.y);
                    let out = polish(
                        &self.problem,
                        &sol,
                        &sets,
                        self.settings.polish_delta,
                        self.settings.refine_steps,
                        self.settings.eps_abs,
                        self.settings.eps_rel,
                    );
                    result.timings.polish = polish_start.elapsed().as_secs_f64();
                    if out.accepted {
                        result.polish = PolishOutcome::Accepted;
                        if let Some(pi) = out.info {
                            result.prim_res = pi.prim_res;
                            result.dual_res = pi.dual_res;
                        }
                        sol = out.solution;
                    } else {
                        result.polish = PolishOutcome::Rejected;
                    }
                }
                result.objective = Some(self.problem.objective(&sol.x));
                result.solution = Some(sol);
            }
            _ => {}
        }
        result
    }
}

fn build_rho(rho_bar: f64, is_equality: &[bool], multiplier: f64) -> Vec<f64> {
    is_equality.iter().map(|&eq| if eq { multiplier * rho_bar } else { rho_bar }).collect()
}

/// Applies an existing scaling to new problem data.
fn rescale_with(s: &ScalingResult, prob: &ProblemData) -> ProblemData {
    let mut out = prob.clone();
    out.p.scale_rows_cols(&s.d, &s.d);
    out.p.scale(s.c);
    out.a.scale_rows_cols(&s.e, &s.d);
    out.q = s.scale_q(&prob.q);
    out.l = prob.l.iter().zip(&s.e).map(|(v, e)| scale_bound(*v, *e)).collect();
    out.u = prob.u.iter().zip(&s.e).map(|(v, e)| scale_bound(*v, *e)).collect();
    out
}

/// Sets up and solves in one call.
pub fn solve(problem: ProblemData, settings: Settings) -> Result<SolveResult, SolverError> {
    Ok(Solver::setup(problem, settings)?.solve())
}
