//! Solution polishing: guess the active constraints from the dual signs,
//! solve the equality-constrained QP they define through a regularized
//! reduced KKT system, and refine the result iteratively.

use crate::linsys::{self, form_kkt, NumericFactor, Ordering, SymbolicFactor};
use crate::problem::ProblemData;
use crate::solver::termination::{unscaled_residual_info, ResidualInfo};
use crate::solver::Solution;
use crate::vector::project_box;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSets {
    /// Rows with `y < 0`, treated as `a_i x = l_i`.
    pub lower: Vec<usize>,
    /// Rows with `y > 0`, treated as `a_i x = u_i`.
    pub upper: Vec<usize>,
}

pub fn guess_active_sets(y: &[f64]) -> ActiveSets {
    let mut sets = ActiveSets::default();
    for (i, &v) in y.iter().enumerate() {
        if v < 0.0 {
            sets.lower.push(i);
        } else if v > 0.0 {
            sets.upper.push(i);
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolishOutput {
    pub solution: Solution,
    pub accepted: bool,
    pub info: Option<ResidualInfo>,
}

/// `steps` refinement passes `t <- t + (K + ΔK)⁻¹ (g - K t)` starting from
/// the regularized solution. `k_apply(t, out)` writes `K t`; the factor is
/// of `K + ΔK`.
pub fn iterative_refine<F>(
    mut k_apply: F,
    fac: &NumericFactor,
    sym: &SymbolicFactor,
    g: &[f64],
    steps: usize,
) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut work = Vec::with_capacity(g.len());
    let mut t = g.to_vec();
    linsys::ldl::kkt_solve_in_place(fac, sym, &mut t, &mut work);
    let mut kt = vec![0.0; g.len()];
    let mut corr = vec![0.0; g.len()];
    for _ in 0..steps {
        k_apply(&t, &mut kt);
        for i in 0..g.len() {
            corr[i] = g[i] - kt[i];
        }
        linsys::ldl::kkt_solve_in_place(fac, sym, &mut corr, &mut work);
        for i in 0..g.len() {
            t[i] += corr[i];
        }
    }
    t
}

/// Largest violation of `y₊ᵀ(z − u) = 0`, `y₋ᵀ(z − l) = 0` over the rows.
/// Infinite when a nonzero multiplier sits on an infinite bound.
pub fn complementarity_violation(prob: &ProblemData, y: &[f64], z: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        let v = if y[i] > 0.0 {
            y[i] * (prob.u[i] - z[i])
        } else if y[i] < 0.0 {
            y[i] * (prob.l[i] - z[i])
        } else {
            0.0
        };
        worst = worst.max(v.abs());
    }
    worst
}

/// Polishes `sol` on the original (unscaled) problem. The polished point is
/// accepted only when it meets the tolerances, does not increase either
/// residual, and is complementary to `1e-9`; otherwise `sol` is returned.
#[allow(clippy::too_many_arguments)]
pub fn polish(
    prob: &ProblemData,
    sol: &Solution,
    sets: &ActiveSets,
    delta: f64,
    refine_steps: usize,
    eps_abs: f64,
    eps_rel: f64,
) -> PolishOutput {
    let rejected = |info| PolishOutput { solution: sol.clone(), accepted: false, info };
    let (n, m) = (prob.n(), prob.m());
    let rows: Vec<usize> = sets.lower.iter().chain(&sets.upper).copied().collect();
    let a_red = prob.a.select_rows(&rows);
    let nr = rows.len();

    let kkt = match form_kkt(&prob.p, &a_red, delta, &vec![1.0 / delta; nr]) {
        Ok(k) => k,
        Err(_) => return rejected(None),
    };
    let factor = linsys::symbolic_factor(kkt.matrix(), Ordering::Amd)
        .and_then(|sym| linsys::numeric_factor(kkt.matrix(), &sym).map(|f| (sym, f)));
    let (sym, fac) = match factor {
        Ok(sf) => sf,
        Err(e) => {
            log::debug!("polish factorization failed: {e}");
            return rejected(None);
        }
    };

    let mut g = vec![0.0; n + nr];
    for j in 0..n {
        g[j] = -prob.q[j];
    }
    for (k, &i) in sets.lower.iter().enumerate() {
        g[n + k] = prob.l[i];
    }
    for (k, &i) in sets.upper.iter().enumerate() {
        g[n + sets.lower.len() + k] = prob.u[i];
    }
    if g.iter().any(|v| !v.is_finite()) {
        return rejected(None);
    }

    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut ax = vec![0.0; nr];
    let k_apply = |t: &[f64], out: &mut [f64]| {
        let (x, yr) = t.split_at(n);
        prob.p.sym_upper_mul_vec_into(x, &mut px);
        a_red.mul_vec_into(yr, &mut aty, true);
        a_red.mul_vec_into(x, &mut ax, false);
        for j in 0..n {
            out[j] = px[j] + aty[j];
        }
        out[n..].copy_from_slice(&ax);
    };
    let t = iterative_refine(k_apply, &fac, &sym, &g, refine_steps);

    let x = t[..n].to_vec();
    let mut y = vec![0.0; m];
    for (k, &i) in rows.iter().enumerate() {
        y[i] = t[n + k];
    }
    let mut axf = vec![0.0; m];
    prob.a.mul_vec_into(&x, &mut axf, false);
    let z: Vec<f64> = (0..m).map(|i| project_box(axf[i], prob.l[i], prob.u[i])).collect();
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return rejected(None);
    }

    let before = unscaled_residual_info(prob, &sol.x, &sol.y, &sol.z, eps_abs, eps_rel);
    let after = unscaled_residual_info(prob, &x, &y, &z, eps_abs, eps_rel);
    let y_norm = crate::vector::inf_norm(&y);
    let z_norm = crate::vector::inf_norm(&z);
    let compl_ok = complementarity_violation(prob, &y, &z) <= 1e-9 * (1.0 + y_norm * z_norm);
    let accepted = after.converged()
        && after.prim_res <= before.prim_res
        && after.dual_res <= before.dual_res
        && compl_ok;
    if accepted {
        PolishOutput { solution: Solution { x, y, z }, accepted: true, info: Some(after) }
    } else {
        rejected(Some(after))
    }
}
