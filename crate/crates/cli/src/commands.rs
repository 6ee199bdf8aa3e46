use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use hkq_core::critical::{
    anticommutator_check, assemble_lifted_hessian_signed, check_kernel_containment, find_critical_points,
    hessian_f23, morse_index, verify_critical_identities, CriticalOptions, CriticalPoint,
};
use hkq_core::flow::{classify_semistable, integrate_descent, lyapunov_monitor_u1, project_onto_w, Semistability};
use hkq_core::frames::check_general_frame;
use hkq_core::local_model::verify_cone_structure;
use hkq_core::morse::{
    assemble_quotient_series, circle_example, classifying_series, default_cap, PoincareSeries, StratumDatum,
};
use hkq_core::{ActionModel, FlowStatus, FlowTrace, Frame, ModelSpec, Objective, State, C64, EPSILON};

use crate::config::{AssemblySpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::report::Failure;

const ANTICOMMUTATOR_TOL: f64 = 1e-6;
const ADJUGATE_TOL: f64 = 1e-8;
const KERNEL_TOL: f64 = 1e-8;
/// Default cap for explicit assemblies, which carry no model dimension.
const ASSEMBLY_CAP: usize = 10;

/// What a subcommand hands back for persistence.
#[derive(Default)]
pub struct Outcome {
    pub result: Value,
    pub failures: Vec<Failure>,
    /// Traces to write, keyed by start index.
    pub traces: Vec<(usize, FlowTrace)>,
}

fn frame_json(frame: &Frame, attempts: Option<usize>) -> Value {
    json!({ "rows": frame.rows(), "sampling_attempts": attempts })
}

fn series_json(s: &PoincareSeries) -> Value {
    let dense = s.trimmed();
    let even: Vec<i64> = dense.iter().step_by(2).copied().collect();
    json!({
        "cap": s.cap(),
        "coefficients": dense,
        "even_coefficients": even,
        "display": s.to_string(),
        "nonnegative": s.is_nonnegative(),
        "palindromic": s.is_palindromic(),
    })
}

fn rho_scaled(z: &State, tol: f64) -> f64 {
    tol * (1.0 + z.norm_sqr())
}

#[derive(Serialize)]
struct FlowRun {
    index: usize,
    status: FlowStatus,
    initial_f: f64,
    final_f: f64,
    final_time: f64,
    sup_rho: f64,
    accepted: usize,
    rejected: usize,
    monotonicity_violations: usize,
}

/// Descent sweep with flow-closedness evidence: every run must stay bounded
/// and descend monotonically.
pub fn flow(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, model) = cfg.require_model()?;
    let (frame, attempts) = cfg.resolve_frame(&model)?;
    let mut failures = Vec::new();
    let mut starts: Vec<(usize, State)> = cfg.starts(model.n()).into_iter().enumerate().collect();
    if cfg.objective == Objective::Mu1SqOnW {
        let projected: Vec<_> = starts
            .par_iter()
            .map(|(k, z)| (*k, project_onto_w(&model, &frame, z, rho_scaled(z, 1e-12))))
            .collect();
        starts = Vec::new();
        for (k, p) in projected {
            match p {
                Ok(p) => starts.push((k, p.z)),
                Err(e) => failures.push(Failure::at("projection", k, e.to_string())),
            }
        }
    }
    let runs: Vec<(usize, std::result::Result<FlowTrace, hkq_core::Error>)> = starts
        .par_iter()
        .map(|(k, z)| (*k, integrate_descent(&model, &frame, cfg.objective, z, &cfg.flow)))
        .collect();

    let mut table = Vec::new();
    let mut traces = Vec::new();
    for (k, run) in runs {
        let tr = match run {
            Ok(tr) => tr,
            Err(e) => {
                failures.push(Failure::at("integration", k, e.to_string()));
                continue;
            }
        };
        if tr.status == FlowStatus::Diverged {
            failures.push(Failure::at("bounded", k, format!("ρ reached {:e}", tr.last().rho)));
        }
        if tr.stats.monotonicity_violations > 0 {
            failures.push(Failure::at(
                "monotone",
                k,
                format!("{} steps increased the objective", tr.stats.monotonicity_violations),
            ));
        }
        table.push(FlowRun {
            index: k,
            status: tr.status,
            initial_f: tr.first().f,
            final_f: tr.last().f,
            final_time: tr.last().t,
            sup_rho: tr.sup_rho(),
            accepted: tr.stats.accepted,
            rejected: tr.stats.rejected,
            monotonicity_violations: tr.stats.monotonicity_violations,
        });
        if k < cfg.traces {
            traces.push((k, tr));
        }
    }
    let count = |s: FlowStatus| table.iter().filter(|r| r.status == s).count();
    let result = json!({
        "frame": frame_json(&frame, attempts),
        "objective": cfg.objective,
        "starts": cfg.sampler.count,
        "statuses": {
            "converged-critical": count(FlowStatus::ConvergedCritical),
            "converged-zero-level": count(FlowStatus::ConvergedZeroLevel),
            "diverged": count(FlowStatus::Diverged),
            "max-time": count(FlowStatus::MaxTime),
        },
        "sup_rho": table.iter().map(|r| r.sup_rho).fold(0.0, f64::max),
        "runs": table,
    });
    Ok(Outcome { result, failures, traces })
}

fn circle_constant(spec: &ModelSpec) -> Option<(usize, C64)> {
    match spec {
        ModelSpec::Circle { n, c, .. } => Some((*n, C64::new(c[0], c[1]))),
        _ => None,
    }
}

/// Boundedness certificate along circle descents.
pub fn lyapunov(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (spec, model) = cfg.require_model()?;
    let (_, c) = circle_constant(&spec).ok_or_else(|| CliError::Invalid("lyapunov needs a circle model".into()))?;
    let (frame, _) = cfg.resolve_frame(&model)?;
    if frame != Frame::identity() {
        return Err(CliError::Invalid("lyapunov runs in the identity frame".into()));
    }
    if cfg.objective != Objective::F23OnV {
        return Err(CliError::Invalid("lyapunov certifies the f23-on-v descent".into()));
    }
    let starts = cfg.starts(model.n());
    let runs: Vec<_> = starts
        .par_iter()
        .map(|z| {
            let tr = integrate_descent(&model, &frame, Objective::F23OnV, z, &cfg.flow)?;
            let rep = lyapunov_monitor_u1(&model, &frame, &tr, c)?;
            Ok((tr, rep))
        })
        .collect::<Vec<std::result::Result<_, hkq_core::Error>>>();

    let mut failures = Vec::new();
    let mut table = Vec::new();
    let mut traces = Vec::new();
    let mut certified = 0;
    let mut worst_identity: f64 = 0.0;
    let mut worst_bound = f64::INFINITY;
    let mut worst_inequality = f64::INFINITY;
    for (k, run) in runs.into_iter().enumerate() {
        let (tr, rep) = match run {
            Ok(r) => r,
            Err(e) => {
                failures.push(Failure::at("integration", k, e.to_string()));
                continue;
            }
        };
        if rep.passed {
            certified += 1;
        } else {
            failures.push(Failure::at(
                "certificate",
                k,
                format!(
                    "identity rel {:e}, bound margin {:e}, inequality margin {:e}",
                    rep.worst_identity_rel, rep.worst_bound_margin, rep.worst_inequality_margin
                ),
            ));
        }
        worst_identity = worst_identity.max(rep.worst_identity_rel);
        worst_bound = worst_bound.min(rep.worst_bound_margin);
        worst_inequality = worst_inequality.min(rep.worst_inequality_margin);
        table.push(json!({ "index": k, "status": tr.status, "certificate": rep }));
        if k < cfg.traces {
            traces.push((k, tr));
        }
    }
    let result = json!({
        "c": [c.re, c.im],
        "starts": starts.len(),
        "certified": certified,
        "worst_identity_rel": worst_identity,
        "worst_bound_margin": worst_bound,
        "worst_inequality_margin": worst_inequality,
        "runs": table,
    });
    Ok(Outcome { result, failures, traces })
}

fn critical_point_json(model: &ActionModel, frame: &Frame, k: usize, cp: &CriticalPoint, failures: &mut Vec<Failure>) -> Result<Value> {
    let ident = verify_critical_identities(model, frame, cp);
    if !ident.passed {
        failures.push(Failure::at("identities", k, format!("{ident:?}")));
    }
    let hess = hessian_f23(model, frame, &cp.z)?;
    let index = morse_index(&hess);
    let anti = anticommutator_check(model, frame, cp);
    if anti.anticommutator_rel > ANTICOMMUTATOR_TOL || anti.square_rel > ANTICOMMUTATOR_TOL {
        failures.push(Failure::at(
            "anticommutator",
            k,
            format!("anticommutator {:e}, square {:e}", anti.anticommutator_rel, anti.square_rel),
        ));
    }
    let lifted = match assemble_lifted_hessian_signed(model, cp, EPSILON) {
        Ok(lh) => {
            let kernel = check_kernel_containment(&lh);
            if lh.adjugate_residual > ADJUGATE_TOL {
                failures.push(Failure::at("adjugate", k, format!("residual {:e}", lh.adjugate_residual)));
            }
            if kernel.worst_kernel_distance > KERNEL_TOL {
                failures.push(Failure::at("kernel", k, format!("distance {:e}", kernel.worst_kernel_distance)));
            }
            json!({
                "commutation_residual": lh.commutation_residual,
                "adjugate_residual": lh.adjugate_residual,
                "a_kernel_outside_stab": lh.a_kernel_outside_stab,
                "a_min_eigenvalue": lh.a_min_eigenvalue,
                "stab_dim": lh.stab.ncols(),
                "kernel": kernel,
            })
        }
        Err(e) => {
            failures.push(Failure::at("lifted-hessian", k, e.to_string()));
            Value::Null
        }
    };
    Ok(json!({
        "seed": cp.seed,
        "z": cp.z,
        "f": cp.f,
        "grad_norm": cp.grad_norm,
        "betas": cp.betas,
        "identities": ident,
        "eigenvalues": hess.eigenvalues,
        "inertia": hess.inertia,
        "morse_index": index,
        "anticommutator": anti,
        "lifted": lifted,
    }))
}

/// Finds critical points of `f₂₃` from the sampled seeds and checks each one.
pub fn critical(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, model) = cfg.require_model()?;
    let (frame, attempts) = cfg.resolve_frame(&model)?;
    let seeds = cfg.starts(model.n());
    let opts = CriticalOptions {
        flow: cfg.flow.clone(),
        ..Default::default()
    };
    let search = find_critical_points(&model, &frame, &seeds, &opts)?;
    let mut failures = Vec::new();
    let points = search
        .points
        .iter()
        .enumerate()
        .map(|(k, cp)| critical_point_json(&model, &frame, k, cp, &mut failures))
        .collect::<Result<Vec<_>>>()?;
    let odd: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p["morse_index"]["even"] == Value::Bool(false))
        .map(|(k, _)| k)
        .collect();
    let result = json!({
        "frame": frame_json(&frame, attempts),
        "seeds": seeds.len(),
        "certified": search.all.len(),
        "distinct": search.points.len(),
        "dropped": search.dropped,
        "odd_index_anomalies": odd,
        "points": points,
    });
    Ok(Outcome {
        result,
        failures,
        traces: Vec::new(),
    })
}

/// General-frame verdict for the configured (or sampled) frame.
pub fn frame_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, model) = cfg.require_model()?;
    let (frame, attempts) = match cfg.resolve_frame(&model) {
        Ok(f) => f,
        Err(CliError::Core(e @ hkq_core::Error::DegenerateFrames { .. })) => {
            return Ok(Outcome {
                result: json!({ "verdict": "no-general-frame" }),
                failures: vec![Failure::new("general-frame", e.to_string())],
                traces: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let rep = check_general_frame(&model, &frame)?;
    let mut failures = Vec::new();
    if !rep.is_general() {
        failures.push(Failure::new("general-frame", format!("{:?}", rep.verdict)));
    }
    let result = json!({
        "frame": frame_json(&frame, attempts),
        "verdict": rep.verdict,
        "constraints": rep.constraints,
        "min_complex_part": rep.min_complex_part,
        "data": rep.data,
    });
    Ok(Outcome {
        result,
        failures,
        traces: Vec::new(),
    })
}

fn assembled(spec: &AssemblySpec, cap: usize) -> Result<Outcome> {
    let base = classifying_series(spec.base, cap);
    let strata = spec
        .strata
        .iter()
        .map(|s| {
            let component = PoincareSeries::from_coefficients(&s.component, cap);
            StratumDatum::fixed_component(s.index, s.stabilizer, &component, s.label.clone())
                .map_err(|e| CliError::Invalid(format!("stratum '{}': {e}", s.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (series, failures) = match assemble_quotient_series(&base, &strata, cap) {
        Ok(s) => (Some(s), Vec::new()),
        Err(e @ hkq_core::Error::PerfectionViolation { .. }) => (None, vec![Failure::new("perfection", e.to_string())]),
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    let result = json!({
        "source": "assembly",
        "base": series_json(&base),
        "strata": strata.iter().map(|s| json!({ "label": s.label, "index": s.index, "series": series_json(&s.series) })).collect::<Vec<_>>(),
        "series": series.as_ref().map(series_json),
    });
    Ok(Outcome {
        result,
        failures,
        traces: Vec::new(),
    })
}

/// Base-minus-strata assembly, either from explicit strata or end to end for
/// a circle model.
pub fn poincare(cfg: &ExperimentConfig) -> Result<Outcome> {
    if let Some(spec) = &cfg.assembly {
        return assembled(spec, cfg.cap.unwrap_or(ASSEMBLY_CAP));
    }
    let (spec, _) = cfg.require_model()?;
    let (n, c) = circle_constant(&spec)
        .ok_or_else(|| CliError::Invalid("poincare needs a circle model or explicit assembly data".into()))?;
    let cap = cfg.cap.unwrap_or_else(|| default_cap(n));
    let ex = match circle_example(n, c, cap) {
        Ok(ex) => ex,
        Err(e @ (hkq_core::Error::CheckFailed(_) | hkq_core::Error::PerfectionViolation { .. })) => {
            return Ok(Outcome {
                result: json!({ "source": "circle", "n": n }),
                failures: vec![Failure::new("circle-example", e.to_string())],
                traces: Vec::new(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let mut failures = Vec::new();
    if ex.series != ex.closed_form {
        failures.push(Failure::new("closed-form", format!("{} vs {}", ex.series, ex.closed_form)));
    }
    if !ex.series.is_nonnegative() {
        failures.push(Failure::new("perfection", ex.series.to_string()));
    }
    let result = json!({
        "source": "circle",
        "n": n,
        "c": [c.re, c.im],
        "series": series_json(&ex.series),
        "closed_form": series_json(&ex.closed_form),
        "origin_index": ex.origin_index,
        "critical_values": ex.critical_values,
        "seeds": ex.seeds,
    });
    Ok(Outcome {
        result,
        failures,
        traces: Vec::new(),
    })
}

/// Chart-by-chart checks of the blown-up quadric cones.
pub fn blowup_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for (name, q) in cfg.quadrics()? {
        let rep = verify_cone_structure(&q, cfg.chart_samples, cfg.sampler.seed)?;
        if !rep.passed {
            failures.push(Failure::new(
                "cone-structure",
                format!(
                    "{name}: fiber {:e}, product {:e}, blow-down {:e}, cocycle {:e}/{:e}",
                    rep.fiber_independence,
                    rep.product_margin,
                    rep.blowdown_margin,
                    rep.cocycle_fiber_margin,
                    rep.cocycle_equation_margin
                ),
            ));
        }
        reports.push(json!({ "name": name, "report": rep }));
    }
    Ok(Outcome {
        result: json!({ "quadrics": reports }),
        failures,
        traces: Vec::new(),
    })
}

/// Projects the sampled starts onto `W` and classifies each one.
pub fn semistable(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, model) = cfg.require_model()?;
    let (frame, attempts) = cfg.resolve_frame(&model)?;
    let frame_report = check_general_frame(&model, &frame)?;
    let mut failures = Vec::new();
    if !frame_report.is_general() {
        failures.push(Failure::new("general-frame", format!("{:?}", frame_report.verdict)));
    }
    let starts = cfg.starts(model.n());
    let runs: Vec<_> = starts
        .par_iter()
        .map(|z| {
            let p = project_onto_w(&model, &frame, z, rho_scaled(z, 1e-12))?;
            classify_semistable(&model, &frame, &p.z, &cfg.flow)
        })
        .collect();
    let mut table = Vec::new();
    let mut tally = [0usize; 3];
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok(rep) => {
                let slot = match rep.verdict {
                    Semistability::Semistable => 0,
                    Semistability::NotSemistable => 1,
                    Semistability::Undecided => 2,
                };
                tally[slot] += 1;
                if rep.verdict == Semistability::Undecided {
                    failures.push(Failure::at("decided", k, format!("terminal ‖μ₁‖ {:e}", rep.terminal_mu1)));
                }
                table.push(json!({ "index": k, "report": rep }));
            }
            Err(e) => failures.push(Failure::at("classification", k, e.to_string())),
        }
    }
    let result = json!({
        "frame": frame_json(&frame, attempts),
        "frame_verdict": frame_report.verdict,
        "starts": starts.len(),
        "semistable": tally[0],
        "not_semistable": tally[1],
        "undecided": tally[2],
        "runs": table,
    });
    Ok(Outcome {
        result,
        failures,
        traces: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        c.validate().unwrap();
        c
    }

    #[test]
    fn poincare_for_the_circle_on_c2() {
        let out = poincare(&cfg(r#"{"model": {"kind": "circle", "n": 2, "c": [1, 0]}}"#)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.result["series"]["even_coefficients"], json!([1, 1]));
        assert_eq!(out.result["origin_index"]["index"], json!(4));
    }

    #[test]
    fn explicit_assembly_matches_the_circle_example() {
        let text = r#"{"cap": 8, "assembly": {"base": {"group": "circle"},
            "strata": [{"index": 6, "stabilizer": {"group": "circle"}, "label": "origin"}]}}"#;
        let out = poincare(&cfg(text)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.result["series"]["coefficients"], json!([1, 0, 1, 0, 1]));
    }

    #[test]
    fn imperfect_assembly_is_a_failure_not_an_error() {
        let text = r#"{"cap": 6, "assembly": {"base": {"group": "circle"},
            "strata": [{"index": 2, "stabilizer": {"group": "circle"}, "component": [2]}]}}"#;
        let out = poincare(&cfg(text)).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].check, "perfection");
    }

    #[test]
    fn odd_stratum_index_is_a_config_error() {
        let text = r#"{"assembly": {"base": {"group": "circle"}, "strata": [{"index": 3, "stabilizer": {"group": "circle"}}]}}"#;
        assert!(matches!(poincare(&cfg(text)), Err(CliError::Invalid(_))));
    }

    #[test]
    fn lyapunov_rejects_other_models() {
        let c = cfg(r#"{"model": {"kind": "end", "n": 2}}"#);
        assert!(matches!(lyapunov(&c), Err(CliError::Invalid(_))));
    }

    #[test]
    fn identity_frame_is_not_general_with_a_real_constant() {
        let out = frame_check(&cfg(r#"{"model": {"kind": "circle", "n": 2, "c1": 0.5}}"#)).unwrap();
        assert_eq!(out.failures.len(), 1);
        let out = frame_check(&cfg(r#"{"model": {"kind": "circle", "n": 2, "c1": 0.5}, "frame": {"kind": "sample-general", "seed": 3}}"#)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.result["constraints"], json!(1));
    }

    #[test]
    fn flow_keeps_requested_traces_in_start_order() {
        let c = cfg(r#"{"model": {"kind": "circle", "n": 1, "c": [1, 0]}, "sampler": {"count": 6, "seed": 4}, "traces": 3}"#);
        let out = flow(&c).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.traces.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(out.result["runs"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn critical_points_of_the_circle_are_checked() {
        let c = cfg(r#"{"model": {"kind": "circle", "n": 1, "c": [1, 0]}, "sampler": {"count": 8, "seed": 2}}"#);
        let out = critical(&c).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert!(out.result["distinct"].as_u64().unwrap() >= 1);
    }
}
