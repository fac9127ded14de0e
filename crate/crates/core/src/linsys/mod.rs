//! Linear-system backends for the ADMM step: a cached sparse LDLᵀ of the
//! quasi-definite KKT matrix, or conjugate gradient on the reduced system.

pub mod amd;
pub mod cg;
pub mod kkt;
pub mod ldl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CscMatrix;

pub use cg::{cg_solve_reduced, CgOutcome};
pub use kkt::{form_kkt, KktMatrix};
pub use ldl::{kkt_solve, numeric_factor, symbolic_factor, NumericFactor, SymbolicFactor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsysError {
    #[error("zero pivot {value:e} at elimination step {index}")]
    ZeroPivot { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter must be positive and finite: {0}")]
    NonPositive(String),
    #[error("matrix pattern differs from the one analysed")]
    PatternMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Natural,
    #[default]
    Amd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Direct,
    Indirect,
}

/// Writes `rho_new` into the KKT matrix and refactors with the cached
/// symbolic analysis.
pub fn update_rho_values(
    kkt: &mut KktMatrix,
    rho_new: &[f64],
    sym: &SymbolicFactor,
) -> Result<NumericFactor, LinsysError> {
    kkt.set_rho(rho_new)?;
    numeric_factor(kkt.matrix(), sym)
}

/// Factorization and solve counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinsysStats {
    pub symbolic_factorizations: usize,
    pub numeric_factorizations: usize,
    /// Number of times a zero pivot forced `sigma` up.
    pub sigma_boosts: usize,
    pub cg_iterations: usize,
}

// one per solver; boxing the direct variant buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum Engine {
    Direct {
        kkt: KktMatrix,
        sym: SymbolicFactor,
        fac: NumericFactor,
        rhs: Vec<f64>,
        work: Vec<f64>,
    },
    Indirect {
        p: CscMatrix,
        a: CscMatrix,
        sigma: f64,
        rho: Vec<f64>,
        tol: f64,
        max_iter: usize,
        x_prev: Vec<f64>,
        tmp_m: Vec<f64>,
        tmp_n: Vec<f64>,
    },
}

/// Solves the ADMM linear subproblem for either backend.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    engine: Engine,
    n: usize,
    m: usize,
    stats: LinsysStats,
    last_solve_work: f64,
}

/// CG options used by the indirect backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

fn factor_with_retry(
    kkt: &mut KktMatrix,
    sym: &SymbolicFactor,
    stats: &mut LinsysStats,
) -> Result<NumericFactor, LinsysError> {
    stats.numeric_factorizations += 1;
    match numeric_factor(kkt.matrix(), sym) {
        Err(LinsysError::ZeroPivot { index, value }) => {
            let boosted = kkt.sigma() * 10.0;
            log::warn!("zero pivot {value:e} at step {index}; retrying with sigma = {boosted:e}");
            kkt.set_sigma(boosted)?;
            stats.sigma_boosts += 1;
            stats.numeric_factorizations += 1;
            numeric_factor(kkt.matrix(), sym)
        }
        other => other,
    }
}

impl LinearSystem {
    pub fn new_direct(
        p: &CscMatrix,
        a: &CscMatrix,
        sigma: f64,
        rho: &[f64],
        ordering: Ordering,
    ) -> Result<Self, LinsysError> {
        let mut stats = LinsysStats::default();
        let mut kkt = form_kkt(p, a, sigma, rho)?;
        let sym = symbolic_factor(kkt.matrix(), ordering)?;
        stats.symbolic_factorizations += 1;
        let fac = factor_with_retry(&mut kkt, &sym, &mut stats)?;
        let dim = kkt.n() + kkt.m();
        let last_solve_work = sym.solve_work();
        Ok(Self {
            n: kkt.n(),
            m: kkt.m(),
            engine: Engine::Direct {
                kkt,
                sym,
                fac,
                rhs: vec![0.0; dim],
                work: Vec::with_capacity(dim),
            },
            stats,
            last_solve_work,
        })
    }

    pub fn new_indirect(
        p: &CscMatrix,
        a: &CscMatrix,
        sigma: f64,
        rho: &[f64],
        options: CgOptions,
    ) -> Result<Self, LinsysError> {
        // Validates dimensions and parameters the same way the direct path does.
        form_kkt(p, a, sigma, rho)?;
        if !(options.tol > 0.0) {
            return Err(LinsysError::NonPositive(format!("cg tol = {}", options.tol)));
        }
        let (n, m) = (p.ncols(), a.nrows());
        Ok(Self {
            n,
            m,
            engine: Engine::Indirect {
                p: p.clone(),
                a: a.clone(),
                sigma,
                rho: rho.to_vec(),
                tol: options.tol,
                max_iter: options.max_iter,
                x_prev: vec![0.0; n],
                tmp_m: vec![0.0; m],
                tmp_n: vec![0.0; n],
            },
            stats: LinsysStats::default(),
            last_solve_work: 0.0,
        })
    }

    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Direct { .. } => Backend::Direct,
            Engine::Indirect { .. } => Backend::Indirect,
        }
    }

    pub fn stats(&self) -> LinsysStats {
        self.stats
    }

    /// `sigma` currently in the matrix; larger than requested after a
    /// zero-pivot retry.
    pub fn sigma(&self) -> f64 {
        match &self.engine {
            Engine::Direct { kkt, .. } => kkt.sigma(),
            Engine::Indirect { sigma, .. } => *sigma,
        }
    }

    pub fn rho(&self) -> &[f64] {
        match &self.engine {
            Engine::Direct { kkt, .. } => kkt.rho(),
            Engine::Indirect { rho, .. } => rho,
        }
    }

    /// Work of one numeric factorization in the operation-count proxy; zero
    /// for the indirect backend.
    pub fn factor_work(&self) -> f64 {
        match &self.engine {
            Engine::Direct { sym, .. } => sym.factor_work(),
            Engine::Indirect { .. } => 0.0,
        }
    }

    /// Work of the most recent solve in the operation-count proxy.
    pub fn last_solve_work(&self) -> f64 {
        self.last_solve_work
    }

    pub fn symbolic(&self) -> Option<&SymbolicFactor> {
        match &self.engine {
            Engine::Direct { sym, .. } => Some(sym),
            Engine::Indirect { .. } => None,
        }
    }

    pub fn numeric(&self) -> Option<&NumericFactor> {
        match &self.engine {
            Engine::Direct { fac, .. } => Some(fac),
            Engine::Indirect { .. } => None,
        }
    }

    /// Computes `(x_tilde, z_tilde)` for the current iterates. With the direct
    /// backend `nu_out` receives the multiplier block of the KKT solution;
    /// with the indirect backend it receives `rho (z_tilde - z) + y`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        x: &[f64],
        z: &[f64],
        y: &[f64],
        q: &[f64],
        a: &CscMatrix,
        xt: &mut [f64],
        zt: &mut [f64],
        nu_out: &mut [f64],
    ) -> Result<(), LinsysError> {
        let (n, m) = (self.n, self.m);
        match &mut self.engine {
            Engine::Direct { kkt, sym, fac, rhs, work } => {
                let sigma = kkt.sigma();
                let rho = kkt.rho();
                for j in 0..n {
                    rhs[j] = sigma * x[j] - q[j];
                }
                for i in 0..m {
                    rhs[n + i] = z[i] - y[i] / rho[i];
                }
                ldl::kkt_solve_in_place(fac, sym, rhs, work);
                xt.copy_from_slice(&rhs[..n]);
                for i in 0..m {
                    let nu = rhs[n + i];
                    nu_out[i] = nu;
                    zt[i] = z[i] + (nu - y[i]) / rho[i];
                }
                self.last_solve_work = sym.solve_work();
            }
            Engine::Indirect {
                p,
                a: a_stored,
                sigma,
                rho,
                tol,
                max_iter,
                x_prev,
                tmp_m,
                tmp_n,
            } => {
                debug_assert!(a.nrows() == a_stored.nrows());
                for i in 0..m {
                    tmp_m[i] = rho[i] * z[i] - y[i];
                }
                a_stored.mul_vec_into(tmp_m, tmp_n, true);
                for j in 0..n {
                    tmp_n[j] += *sigma * x[j] - q[j];
                }
                let out = cg_solve_reduced(p, a_stored, *sigma, rho, tmp_n, x_prev, *tol, *max_iter)?;
                if !out.converged {
                    log::warn!(
                        "cg stopped after {} iterations with residual {:e}",
                        out.iterations,
                        out.residual
                    );
                }
                self.stats.cg_iterations += out.iterations;
                xt.copy_from_slice(&out.x);
                x_prev.copy_from_slice(&out.x);
                a_stored.mul_vec_into(xt, zt, false);
                for i in 0..m {
                    nu_out[i] = rho[i] * (zt[i] - z[i]) + y[i];
                }
                let nnz = (p.nnz() + 2 * a_stored.nnz() + n + m) as f64;
                self.last_solve_work = (out.iterations as f64 + 1.0) * nnz;
            }
        }
        Ok(())
    }

    /// Replaces `rho`. The direct backend refactors numerically; the symbolic
    /// analysis is reused.
    pub fn update_rho(&mut self, rho_new: &[f64]) -> Result<(), LinsysError> {
        match &mut self.engine {
            Engine::Direct { kkt, sym, fac, .. } => {
                kkt.set_rho(rho_new)?;
                *fac = factor_with_retry(kkt, sym, &mut self.stats)?;
            }
            Engine::Indirect { rho, .. } => {
                if rho_new.len() != rho.len() {
                    return Err(LinsysError::Dimension(format!(
                        "rho has length {}, expected {}",
                        rho_new.len(),
                        rho.len()
                    )));
                }
                rho.copy_from_slice(rho_new);
            }
        }
        Ok(())
    }

    /// Replaces the values of `P` and `A` (same patterns) and `rho`, then
    /// refactors numerically.
    pub fn update_matrices(
        &mut self,
        p: &CscMatrix,
        a: &CscMatrix,
        rho_new: &[f64],
    ) -> Result<(), LinsysError> {
        match &mut self.engine {
            Engine::Direct { kkt, sym, fac, .. } => {
                kkt.set_matrix_values(p, a)?;
                kkt.set_rho(rho_new)?;
                *fac = factor_with_retry(kkt, sym, &mut self.stats)?;
            }
            Engine::Indirect { p: ps, a: as_, rho, .. } => {
                if !p.same_pattern(ps) || !a.same_pattern(as_) {
                    return Err(LinsysError::PatternMismatch);
                }
                *ps = p.clone();
                *as_ = a.clone();
                rho.copy_from_slice(rho_new);
            }
        }
        Ok(())
    }
}
