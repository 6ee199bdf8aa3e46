//! Gradient descent of `f₂₃ = ‖μ_C‖²` on `V` and of `‖μ₁‖²` on
//! `W = μ_C⁻¹(0)`, with the monitors built on top of it.

mod descent;
mod lyapunov;
pub mod projection;
pub mod rk45;
mod survey;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use descent::integrate_descent;
pub use lyapunov::{lyapunov_monitor_u1, LyapunovReport};
pub use projection::{project_onto_w, Projection};
pub use survey::{flow_closedness_survey, SurveyRun, SurveySummary};

use crate::error::Result;
use crate::models::{ActionModel, FramedModel};
use crate::quaternionic::{Frame, HVec, State, Tangent};
use crate::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `‖μ_C‖²` on the whole space.
    F23OnV,
    /// `‖μ₁‖²` on `W`, flowing tangentially to `W`.
    Mu1SqOnW,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    ConvergedCritical,
    ConvergedZeroLevel,
    Diverged,
    MaxTime,
}

impl FlowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ConvergedCritical => "converged-critical",
            Self::ConvergedZeroLevel => "converged-zero-level",
            Self::Diverged => "diverged",
            Self::MaxTime => "max-time",
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, Self::ConvergedCritical | Self::ConvergedZeroLevel)
    }
}

impl std::fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Stop once the (projected) gradient norm drops to this value.
    pub grad_tol: f64,
    /// Stop once the objective drops to this value.
    pub zero_level: f64,
    pub max_time: f64,
    /// Divergence radius for `ρ = ‖z‖²`.
    pub rho_max: f64,
    pub max_steps: usize,
    /// Divide the velocity by `max(√f, floor)`: same orbits and limit sets,
    /// but polynomially slow approaches to the zero level become exponential.
    pub normalize_time: bool,
    pub normalize_floor: f64,
    /// Relative drift tolerance for `‖μ_C‖` during flows on `W`; projection
    /// back onto `W` is triggered at ten times this value.
    pub w_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            grad_tol: 1e-10,
            zero_level: 1e-18,
            max_time: 1e4,
            rho_max: 1e8,
            max_steps: 200_000,
            normalize_time: false,
            normalize_floor: 1e-300,
            w_tol: 1e-10,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("grad_tol", self.grad_tol),
            ("zero_level", self.zero_level),
            ("max_time", self.max_time),
            ("rho_max", self.rho_max),
            ("normalize_floor", self.normalize_floor),
            ("w_tol", self.w_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(crate::Error::Domain(format!("flow option {name} must be positive")));
            }
        }
        if self.max_steps == 0 {
            return Err(crate::Error::Domain("flow option max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub z: State,
    pub f: f64,
    pub grad_norm: f64,
    /// `ρ = ‖z‖²`.
    pub rho: f64,
    /// `ρ + √f`.
    pub lyap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Projections back onto `W` after drift.
    pub projections: usize,
    /// Accepted steps whose objective rose by more than `1e-9·(1 + f₀)`.
    pub monotonicity_violations: usize,
    /// Largest `‖μ_C‖ / (1 + ‖z‖²)` seen at samples of flows on `W`.
    pub max_w_drift: f64,
    /// Smallest and largest numerical rank of `dμ_C` used for tangent
    /// projections (a drop flags singular points of `W`).
    pub min_rank: Option<usize>,
    pub max_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub objective: Objective,
    pub samples: Vec<TraceSample>,
    pub status: FlowStatus,
    pub stats: StepStats,
}

impl FlowTrace {
    pub fn first(&self) -> &TraceSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TraceSample {
        self.samples.last().expect("traces are never empty")
    }

    pub fn sup_rho(&self) -> f64 {
        self.samples.iter().map(|s| s.rho).fold(0.0, f64::max)
    }
}

/// Analytic Euclidean gradient of `f₂₃` at `z` in the frame `R`.
pub fn grad_f23(model: &ActionModel, frame: &Frame, z: &State) -> Result<Tangent> {
    check_dim(model, z)?;
    let fm = FramedModel::new(model, *frame);
    Ok(HVec::from_real(&fm.grad_f23(&z.to_real())))
}

/// The gradient assembled from infinitesimal actions,
/// `−ε · 2 j'(μ₂(z)_z − i' μ₃(z)_z)`, with `i', j'` the rotated structures.
pub fn grad_f23_from_actions(model: &ActionModel, frame: &Frame, z: &State) -> Result<Tangent> {
    check_dim(model, z)?;
    let fm = FramedModel::new(model, *frame);
    let zr = z.to_real();
    let betas = fm.betas(&fm.point_data(&zr));
    let s = frame.structure_matrices(model.n());
    let a2 = model.generator_real(&betas[1]) * &zr;
    let a3 = model.generator_real(&betas[2]) * &zr;
    let inner = a2 - &s[0] * a3;
    Ok(HVec::from_real(&(&s[1] * inner * (-2.0 * EPSILON))))
}

fn check_dim(model: &ActionModel, z: &State) -> Result<()> {
    if z.dim() != model.n() {
        return Err(crate::Error::DimensionMismatch {
            expected: model.n(),
            got: z.dim(),
        });
    }
    Ok(())
}

/// Semistability verdict for a point of `W`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semistability {
    Semistable,
    NotSemistable,
    Undecided,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemistableReport {
    pub verdict: Semistability,
    pub status: FlowStatus,
    pub terminal_mu1: f64,
    pub threshold: f64,
    pub steps: usize,
}

/// Classifies `z ∈ W` by descending `‖μ₁‖²` along `W`. The flow is run with
/// time normalisation (see [`FlowOptions::normalize_time`]) so that limits
/// reached polynomially slowly are still observed.
pub fn classify_semistable(model: &ActionModel, frame: &Frame, z: &State, opts: &FlowOptions) -> Result<SemistableReport> {
    let threshold = 1e-8 * (1.0 + z.norm_sqr());
    // Normalised flows reach the zero level in finite time and chatter there,
    // so stop once the verdict is settled.
    let opts = FlowOptions {
        normalize_time: true,
        zero_level: opts.zero_level.max((0.1 * threshold).powi(2)),
        ..opts.clone()
    };
    let trace = integrate_descent(model, frame, Objective::Mu1SqOnW, z, &opts)?;
    let last = trace.last();
    let terminal_mu1 = last.f.sqrt();
    let verdict = if terminal_mu1 <= threshold {
        Semistability::Semistable
    } else {
        match trace.status {
            FlowStatus::Diverged | FlowStatus::ConvergedCritical | FlowStatus::ConvergedZeroLevel => {
                Semistability::NotSemistable
            }
            FlowStatus::MaxTime => Semistability::Undecided,
        }
    };
    Ok(SemistableReport {
        verdict,
        status: trace.status,
        terminal_mu1,
        threshold,
        steps: trace.stats.accepted,
    })
}

/// Euclidean norm of a real vector as a convenience for callers holding
/// real coordinates.
pub(crate) fn rho_of(z: &DVector<f64>) -> f64 {
    z.norm_squared()
}
