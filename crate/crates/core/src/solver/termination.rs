//! Residuals, stopping tolerances, and infeasibility tests.
//!
//! All functions take data in scaled form together with the scaling
//! `(D, E, c)`; passing unit scaling evaluates them on the original problem.

use crate::problem::ProblemData;
use crate::vector::{inf_norm, scaled_inf_norm};

/// Diagonal scaling view: `x = D x̄`, `y = E ȳ / c`, `z = E⁻¹ z̄`.
#[derive(Debug, Clone, Copy)]
pub struct ScalingView<'a> {
    pub d: &'a [f64],
    pub dinv: &'a [f64],
    pub e: &'a [f64],
    pub einv: &'a [f64],
    pub c: f64,
}

/// Unscaled residual norms with the tolerances they are compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualInfo {
    pub prim_res: f64,
    pub dual_res: f64,
    pub eps_prim: f64,
    pub eps_dual: f64,
    /// `||r̄_prim|| / max(||Āx̄||, ||z̄||)` in scaled space, `None` on 0/0.
    pub scaled_prim_ratio: Option<f64>,
    /// `||r̄_dual|| / max(||P̄x̄||, ||Āᵀȳ||, ||q̄||)` in scaled space.
    pub scaled_dual_ratio: Option<f64>,
}

impl ResidualInfo {
    pub fn converged(&self) -> bool {
        self.prim_res <= self.eps_prim && self.dual_res <= self.eps_dual
    }

    /// Within `factor` times both tolerances.
    pub fn within(&self, factor: f64) -> bool {
        self.prim_res <= factor * self.eps_prim && self.dual_res <= factor * self.eps_dual
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 && den.is_finite() && num.is_finite() {
        Some(num / den)
    } else {
        None
    }
}

pub fn residual_info(
    prob: &ProblemData,
    sv: ScalingView<'_>,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    eps_abs: f64,
    eps_rel: f64,
) -> ResidualInfo {
    let (n, m) = (prob.n(), prob.m());
    let mut ax = vec![0.0; m];
    prob.a.mul_vec_into(x, &mut ax, false);
    let mut px = vec![0.0; n];
    prob.p.sym_upper_mul_vec_into(x, &mut px);
    let mut aty = vec![0.0; n];
    prob.a.mul_vec_into(y, &mut aty, true);

    let rp: Vec<f64> = ax.iter().zip(z).map(|(a, b)| a - b).collect();
    let rd: Vec<f64> = (0..n).map(|j| px[j] + prob.q[j] + aty[j]).collect();

    let prim_res = scaled_inf_norm(sv.einv, &rp);
    let prim_scale = scaled_inf_norm(sv.einv, &ax).max(scaled_inf_norm(sv.einv, z));
    let dual_res = scaled_inf_norm(sv.dinv, &rd) / sv.c;
    let dual_scale = scaled_inf_norm(sv.dinv, &px)
        .max(scaled_inf_norm(sv.dinv, &aty))
        .max(scaled_inf_norm(sv.dinv, &prob.q))
        / sv.c;

    let s_prim_scale = inf_norm(&ax).max(inf_norm(z));
    let s_dual_scale = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&prob.q));
    ResidualInfo {
        prim_res,
        dual_res,
        eps_prim: eps_abs + eps_rel * prim_scale,
        eps_dual: eps_abs + eps_rel * dual_scale,
        scaled_prim_ratio: ratio(inf_norm(&rp), s_prim_scale),
        scaled_dual_ratio: ratio(inf_norm(&rd), s_dual_scale),
    }
}

/// Tests whether `dy` (scaled) certifies primal infeasibility:
/// `||D⁻¹Āᵀδȳ|| ≤ ε||Eδȳ||` and `ūᵀ(δȳ)₊ + l̄ᵀ(δȳ)₋ ≤ −ε||Eδȳ||`.
/// An infinite bound paired with a nonzero matching part fails the test.
pub fn check_primal_infeasible(prob: &ProblemData, sv: ScalingView<'_>, dy: &[f64], eps: f64) -> bool {
    let norm = scaled_inf_norm(sv.e, dy);
    if !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let v = dy[i];
        if v > 0.0 {
            if prob.u[i] == f64::INFINITY {
                return false;
            }
            support += prob.u[i] * v;
        } else if v < 0.0 {
            if prob.l[i] == f64::NEG_INFINITY {
                return false;
            }
            support += prob.l[i] * v;
        }
    }
    if support > -eps * norm {
        return false;
    }
    let mut aty = vec![0.0; prob.n()];
    prob.a.mul_vec_into(dy, &mut aty, true);
    scaled_inf_norm(sv.dinv, &aty) <= eps * norm
}

/// Tests whether `dx` (scaled) certifies dual infeasibility:
/// `||D⁻¹P̄δx̄|| ≤ cε||Dδx̄||`, `q̄ᵀδx̄ ≤ −cε||Dδx̄||`, and for each row
/// `(E⁻¹Āδx̄)ᵢ` lies within `ε||Dδx̄||` of the recession cone of `[lᵢ, uᵢ]`.
pub fn check_dual_infeasible(prob: &ProblemData, sv: ScalingView<'_>, dx: &[f64], eps: f64) -> bool {
    let norm = scaled_inf_norm(sv.d, dx);
    if !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    let tol = eps * norm;
    let qdx = crate::vector::dot(&prob.q, dx);
    if qdx > -sv.c * tol {
        return false;
    }
    let mut pdx = vec![0.0; prob.n()];
    prob.p.sym_upper_mul_vec_into(dx, &mut pdx);
    if scaled_inf_norm(sv.dinv, &pdx) > sv.c * tol {
        return false;
    }
    let mut adx = vec![0.0; prob.m()];
    prob.a.mul_vec_into(dx, &mut adx, false);
    for i in 0..prob.m() {
        let v = sv.einv[i] * adx[i];
        let lower_finite = prob.l[i] > f64::NEG_INFINITY;
        let upper_finite = prob.u[i] < f64::INFINITY;
        let ok = match (lower_finite, upper_finite) {
            (true, true) => v.abs() <= tol,
            (true, false) => v >= -tol,
            (false, true) => v <= tol,
            (false, false) => true,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Unit scaling of the right dimensions.
pub struct UnitScaling {
    ones_n: Vec<f64>,
    ones_m: Vec<f64>,
}

impl UnitScaling {
    pub fn new(n: usize, m: usize) -> Self {
        Self { ones_n: vec![1.0; n], ones_m: vec![1.0; m] }
    }

    pub fn view(&self) -> ScalingView<'_> {
        ScalingView {
            d: &self.ones_n,
            dinv: &self.ones_n,
            e: &self.ones_m,
            einv: &self.ones_m,
            c: 1.0,
        }
    }
}

/// Certificate check on the original problem data.
pub fn primal_certificate_holds(prob: &ProblemData, dy: &[f64], eps: f64) -> bool {
    let unit = UnitScaling::new(prob.n(), prob.m());
    check_primal_infeasible(prob, unit.view(), dy, eps)
}

/// Certificate check on the original problem data.
pub fn dual_certificate_holds(prob: &ProblemData, dx: &[f64], eps: f64) -> bool {
    let unit = UnitScaling::new(prob.n(), prob.m());
    check_dual_infeasible(prob, unit.view(), dx, eps)
}

/// Residuals of the original problem at an unscaled point.
pub fn unscaled_residual_info(
    prob: &ProblemData,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    eps_abs: f64,
    eps_rel: f64,
) -> ResidualInfo {
    let unit = UnitScaling::new(prob.n(), prob.m());
    residual_info(prob, unit.view(), x, y, z, eps_abs, eps_rel)
}
