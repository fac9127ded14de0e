use serde::{Deserialize, Serialize};

use crate::linsys::{Backend, Ordering};

/// How the adaptive-rho gate measures the cost of iterating relative to the
/// cost of refactoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoGate {
    /// Operation counts of solves versus factorizations. Reproducible.
    #[default]
    Work,
    /// Measured wall-clock time.
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_pinf: f64,
    pub eps_dinf: f64,
    pub max_iter: usize,
    /// Seconds; `None` disables the limit.
    pub time_limit: Option<f64>,
    pub check_termination_every: usize,
    pub scaling_iters: usize,
    pub scaling_eps: f64,
    pub adaptive_rho: bool,
    pub adaptive_rho_time_fraction: f64,
    pub adaptive_rho_change_factor: f64,
    pub adaptive_rho_max_updates: usize,
    pub adaptive_rho_gate: RhoGate,
    pub polish: bool,
    pub polish_delta: f64,
    pub refine_steps: usize,
    pub linsys_backend: Backend,
    pub ordering: Ordering,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub equality_rho_multiplier: f64,
    /// Keep `D`, `E`, `c` from setup when matrix values change.
    pub freeze_scaling: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-3,
            eps_rel: 1e-3,
            eps_pinf: 1e-4,
            eps_dinf: 1e-4,
            max_iter: 4000,
            time_limit: None,
            check_termination_every: 25,
            scaling_iters: 10,
            scaling_eps: 1e-3,
            adaptive_rho: true,
            adaptive_rho_time_fraction: 0.4,
            adaptive_rho_change_factor: 5.0,
            adaptive_rho_max_updates: 50,
            adaptive_rho_gate: RhoGate::Work,
            polish: true,
            polish_delta: 1e-6,
            refine_steps: 3,
            linsys_backend: Backend::Direct,
            ordering: Ordering::Amd,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            equality_rho_multiplier: 1e3,
            freeze_scaling: false,
        }
    }
}

/// Bounds applied to `rho` after adaptation.
pub const RHO_MIN: f64 = 1e-6;
pub const RHO_MAX: f64 = 1e6;

impl Settings {
    /// Describes the first invalid field, if any.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("eps_pinf", self.eps_pinf),
            ("eps_dinf", self.eps_dinf),
            ("scaling_eps", self.scaling_eps),
            ("adaptive_rho_change_factor", self.adaptive_rho_change_factor),
            ("polish_delta", self.polish_delta),
            ("cg_tol", self.cg_tol),
            ("equality_rho_multiplier", self.equality_rho_multiplier),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("eps_abs", self.eps_abs), ("eps_rel", self.eps_rel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.eps_abs == 0.0 && self.eps_rel == 0.0 {
            return Err("eps_abs and eps_rel cannot both be zero".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if self.check_termination_every == 0 {
            return Err("check_termination_every must be at least 1".into());
        }
        if !(self.adaptive_rho_time_fraction >= 0.0) {
            return Err("adaptive_rho_time_fraction must be nonnegative".into());
        }
        if self.adaptive_rho_change_factor < 1.0 {
            return Err("adaptive_rho_change_factor must be at least 1".into());
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(format!("time_limit must be positive, got {t}"));
            }
        }
        Ok(())
    }
}
