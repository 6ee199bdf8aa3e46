use nalgebra::DVector;

use super::projection::{project_level, tangent_projection};
use super::rk45::{initial_step, trial_step, Controller};
use super::{rho_of, FlowOptions, FlowStatus, FlowTrace, Objective, StepStats, TraceSample};
use crate::error::{Error, Result};
use crate::models::{ActionModel, FramedModel};
use crate::quaternionic::{Frame, HVec, State};

struct Eval {
    f: f64,
    /// Gradient, projected onto `ker dμ_C` for flows on `W`.
    grad: DVector<f64>,
    rank: Option<usize>,
}

struct Evaluator<'a> {
    fm: FramedModel<'a>,
    objective: Objective,
    normalize: bool,
    floor: f64,
}

impl Evaluator<'_> {
    fn eval(&self, z: &DVector<f64>) -> Eval {
        let pd = self.fm.point_data(z);
        match self.objective {
            Objective::F23OnV => Eval {
                f: self.fm.f23_from(&pd),
                grad: self.fm.grad_component_sq(&pd, 1) + self.fm.grad_component_sq(&pd, 2),
                rank: None,
            },
            Objective::Mu1SqOnW => {
                let lie = self.fm.model().lie();
                let g = self.fm.grad_component_sq(&pd, 0);
                let dim = self.fm.dim();
                let jac = pd.images.columns(dim, 2 * dim).transpose();
                let (pg, rank) = tangent_projection(&jac, &g);
                Eval {
                    f: lie.coalgebra_norm_sqr(&pd.pairings[0]),
                    grad: pg,
                    rank: Some(rank),
                }
            }
        }
    }

    fn velocity(&self, z: &DVector<f64>) -> DVector<f64> {
        let e = self.eval(z);
        if self.normalize {
            -e.grad / e.f.sqrt().max(self.floor)
        } else {
            -e.grad
        }
    }

    fn mu_c_norm(&self, z: &DVector<f64>) -> f64 {
        self.fm.f23(z).sqrt()
    }
}

fn sample(t: f64, z: &DVector<f64>, e: &Eval) -> TraceSample {
    let rho = rho_of(z);
    TraceSample {
        t,
        z: HVec::from_real(z),
        f: e.f,
        grad_norm: e.grad.norm(),
        rho,
        lyap: rho + e.f.sqrt(),
    }
}

fn note_rank(stats: &mut StepStats, rank: Option<usize>) {
    if let Some(r) = rank {
        stats.min_rank = Some(stats.min_rank.map_or(r, |m| m.min(r)));
        stats.max_rank = Some(stats.max_rank.map_or(r, |m| m.max(r)));
    }
}

fn terminal_status(e: &Eval, rho: f64, opts: &FlowOptions) -> Option<FlowStatus> {
    if !(rho.is_finite() && e.f.is_finite()) || rho >= opts.rho_max {
        return Some(FlowStatus::Diverged);
    }
    if e.f <= opts.zero_level {
        return Some(FlowStatus::ConvergedZeroLevel);
    }
    // Normalised flows follow grad √f, so that is the quantity that must vanish.
    let stop_norm = if opts.normalize_time {
        e.grad.norm() / (2.0 * e.f.sqrt()).max(opts.normalize_floor)
    } else {
        e.grad.norm()
    };
    if stop_norm <= opts.grad_tol {
        return Some(FlowStatus::ConvergedCritical);
    }
    None
}

/// Integrates `ż = −grad(objective)` with an adaptive Dormand–Prince pair.
///
/// For [`Objective::Mu1SqOnW`] the gradient is projected onto `ker dμ_C` at
/// every stage and the state is projected back onto `W` whenever `‖μ_C‖`
/// exceeds ten times `w_tol·(1 + ‖z‖²)`.
pub fn integrate_descent(
    model: &ActionModel,
    frame: &Frame,
    objective: Objective,
    z0: &State,
    opts: &FlowOptions,
) -> Result<FlowTrace> {
    opts.validate()?;
    if z0.dim() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: z0.dim(),
        });
    }
    let ev = Evaluator {
        fm: FramedModel::new(model, *frame),
        objective,
        normalize: opts.normalize_time,
        floor: opts.normalize_floor,
    };
    let mut z = z0.to_real();
    let on_w = objective == Objective::Mu1SqOnW;
    if on_w {
        let drift = ev.mu_c_norm(&z);
        let allowed = 1e-8 * (1.0 + rho_of(&z));
        if drift > allowed {
            return Err(Error::Precondition(format!(
                "start is not on W: ‖μ_C‖ = {drift:e} > {allowed:e}"
            )));
        }
    }

    let mut stats = StepStats::default();
    let mut t = 0.0;
    let mut e = ev.eval(&z);
    note_rank(&mut stats, e.rank);
    let f0 = e.f;
    let mut samples = vec![sample(t, &z, &e)];
    if on_w {
        stats.max_w_drift = ev.mu_c_norm(&z) / (1.0 + rho_of(&z));
    }
    if let Some(status) = terminal_status(&e, rho_of(&z), opts) {
        return Ok(FlowTrace {
            objective,
            samples,
            status,
            stats,
        });
    }

    let mut f = |_t: f64, y: &DVector<f64>| ev.velocity(y);
    let mut k = f(t, &z);
    let mut h = initial_step(&z, &k, opts.atol, opts.rtol);
    let mut ctl = Controller::default();
    let status = loop {
        if t >= opts.max_time || stats.accepted >= opts.max_steps {
            break FlowStatus::MaxTime;
        }
        h = h.min(opts.max_time - t);
        if h < 1e-14 * t.max(1.0) {
            return Err(Error::StepUnderflow {
                t,
                h,
                last: Box::new(HVec::from_real(&z)),
            });
        }
        let trial = trial_step(&mut f, t, &z, &k, h, opts.rtol, opts.atol);
        if !(trial.err <= 1.0) {
            stats.rejected += 1;
            let fac = if trial.err.is_finite() { ctl.reject(trial.err) } else { 0.1 };
            h *= fac;
            continue;
        }
        t += h;
        z = trial.y;
        k = trial.k_end;
        h *= ctl.accept(trial.err);
        stats.accepted += 1;
        if on_w {
            let rho = rho_of(&z);
            if ev.mu_c_norm(&z) > 10.0 * opts.w_tol * (1.0 + rho) {
                let (zp, _, _) = project_level(&ev.fm, &z, &[1, 2], opts.w_tol * (1.0 + rho))?;
                z = zp;
                k = f(t, &z);
                stats.projections += 1;
            }
            stats.max_w_drift = stats.max_w_drift.max(ev.mu_c_norm(&z) / (1.0 + rho_of(&z)));
        }
        let prev_f = e.f;
        e = ev.eval(&z);
        note_rank(&mut stats, e.rank);
        if e.f > prev_f + 1e-9 * (1.0 + f0) {
            stats.monotonicity_violations += 1;
        }
        samples.push(sample(t, &z, &e));
        if let Some(status) = terminal_status(&e, rho_of(&z), opts) {
            break status;
        }
    };
    Ok(FlowTrace {
        objective,
        samples,
        status,
        stats,
    })
}
