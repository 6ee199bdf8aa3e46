//! Boundedness certificate for circle descents of `f = |x·y − c|²`.
//!
//! With `ρ = ‖z‖²` the gradient satisfies `|grad f|² = 4ρf`, so
//! `⟨grad √f, grad f⟩ = 2ρ√f`, and Euler's identity for the quartic gives
//! `⟨grad ρ, grad f⟩ ≥ 8f − 8|c|√f`. Together these keep `ρ + √f` below
//! `max{4|c| + √f₀, ρ₀ + √f₀}`.

use serde::{Deserialize, Serialize};

use super::FlowTrace;
use crate::error::{Error, Result};
use crate::models::{is_unit_circle, ActionModel, FramedModel};
use crate::quaternionic::{Frame, C64};

/// Samples with `f` at or below this skip the identity check (`√f` is not
/// differentiable on the zero level).
const F_FLOOR: f64 = 1e-12;
pub const IDENTITY_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub samples: usize,
    pub identity_checked: usize,
    /// Largest relative error of `|grad f|²/(2√f) = 2ρ√f`.
    pub worst_identity_rel: f64,
    /// Smallest value of `⟨grad ρ, grad f⟩ − (8f − 8|c|√f)` (≥ 0 expected).
    pub worst_inequality_margin: f64,
    /// Smallest value of `bound + slack − (ρ + √f)` (≥ 0 expected).
    pub worst_bound_margin: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Checks the certificate along a trace of the `f₂₃` descent of a circle
/// model (all weights 1) in the reference frame. `c` is the constant in
/// `μ_C = x·y − c`.
pub fn lyapunov_monitor_u1(model: &ActionModel, frame: &Frame, trace: &FlowTrace, c: C64) -> Result<LyapunovReport> {
    if !is_unit_circle(model) {
        return Err(Error::Unsupported("the certificate applies to circle models with unit weights".into()));
    }
    if *frame != Frame::identity() {
        return Err(Error::Unsupported("the certificate is stated in the reference frame".into()));
    }
    if trace.objective != super::Objective::F23OnV {
        return Err(Error::Unsupported("the certificate concerns the f₂₃ descent".into()));
    }
    let fm = FramedModel::new(model, *frame);
    let first = trace.first();
    let c_abs = c.norm();
    let sqrt_f0 = first.f.sqrt();
    let bound = (4.0 * c_abs + sqrt_f0).max(first.rho + sqrt_f0);
    let slack = 1e-6 * (1.0 + first.rho + sqrt_f0);

    let mut worst_identity: f64 = 0.0;
    let mut checked = 0;
    let mut worst_ineq = f64::INFINITY;
    let mut worst_bound = f64::INFINITY;
    for s in &trace.samples {
        let z = s.z.to_real();
        let f = fm.f23(&z);
        let g = fm.grad_f23(&z);
        let rho = z.norm_squared();
        let sf = f.sqrt();
        if f > F_FLOOR {
            let lhs = g.norm_squared() / (2.0 * sf);
            let rhs = 2.0 * rho * sf;
            worst_identity = worst_identity.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
            checked += 1;
        }
        let grad_rho_dot = 2.0 * z.dot(&g);
        let lower = 8.0 * f - 8.0 * c_abs * sf;
        // Rounding allowance: μ_C is a difference of O(ρ) terms, so its
        // absolute error scales with ρ and enters both sides through √f.
        let round = 1e-12 * (grad_rho_dot.abs() + 8.0 * f + 8.0 * c_abs * sf) + 1e-10 * (1.0 + rho) * sf;
        worst_ineq = worst_ineq.min(grad_rho_dot - lower + round);
        worst_bound = worst_bound.min(bound + slack - (rho + sf));
    }
    let passed = worst_identity <= IDENTITY_REL_TOL && worst_ineq >= 0.0 && worst_bound >= 0.0;
    Ok(LyapunovReport {
        samples: trace.samples.len(),
        identity_checked: checked,
        worst_identity_rel: worst_identity,
        worst_inequality_margin: worst_ineq,
        worst_bound_margin: worst_bound,
        bound,
        slack,
        passed,
    })
}
