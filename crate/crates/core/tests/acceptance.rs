//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use hkq_core::checks::*;
use hkq_core::critical::{
    anticommutator_check, assemble_lifted_hessian_signed, check_kernel_containment, find_critical_points,
    hessian_f23, verify_critical_identities, CriticalOptions, CriticalPoint,
};
use hkq_core::flow::{
    classify_semistable, flow_closedness_survey, integrate_descent, lyapunov_monitor_u1, project_onto_w, Semistability,
};
use hkq_core::frames::{check_general_frame, sample_general_frame};
use hkq_core::local_model::{verify_cone_structure, QuadricModel, BLOWDOWN_TOL, COCYCLE_TOL, PRODUCT_TOL};
use hkq_core::models::Constants;
use hkq_core::morse::{circle_example_pipeline, default_cap, PoincareSeries};
use hkq_core::sampling::{derive_seed, gaussian_state, gaussian_vector, haar_frame, haar_frames, rng, state_in_ball};
use hkq_core::{ActionModel, FlowOptions, FlowStatus, Frame, HVec, ModelSpec, Objective, State, C64, EPSILON};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// End(2) with central constants that keep `f₂₃` away from zero, in a
/// sampled general frame.
fn end2_setup() -> (ActionModel, Frame) {
    let m = ModelSpec::end(2)
        .with_constants(Constants {
            c1_scalar: Some(0.5),
            c_c_scalar: Some([1.0, 0.0]),
            ..Default::default()
        })
        .build()
        .unwrap();
    let f = sample_general_frame(&m, 2024).unwrap().frame;
    (m, f)
}

fn end2_critical_points() -> (ActionModel, Frame, Vec<CriticalPoint>, usize) {
    let (m, f) = end2_setup();
    let mut r = rng(77);
    let seeds: Vec<State> = (0..200).map(|_| state_in_ball(&mut r, m.n(), 10.0)).collect();
    let search = find_critical_points(&m, &f, &seeds, &CriticalOptions::default()).unwrap();
    let dropped = search.dropped.len();
    (m, f, search.all, dropped)
}

fn lyapunov_certificate() -> Outcome {
    let c = C64::new(1.0, 0.0);
    let mut failures = 0;
    let mut total = 0;
    let mut worst_id: f64 = 0.0;
    let mut worst_bound = f64::INFINITY;
    for n in 1..=3 {
        let m = ModelSpec::circle(n, c).build().unwrap();
        let mut r = rng(1000 + n as u64);
        let starts: Vec<State> = (0..100).map(|_| state_in_ball(&mut r, n, 10.0)).collect();
        let reports: Vec<_> = starts
            .par_iter()
            .map(|z0| {
                let tr = integrate_descent(&m, &Frame::identity(), Objective::F23OnV, z0, &FlowOptions::default()).unwrap();
                lyapunov_monitor_u1(&m, &Frame::identity(), &tr, c).unwrap()
            })
            .collect();
        for rep in reports {
            total += 1;
            failures += usize::from(!rep.passed);
            worst_id = worst_id.max(rep.worst_identity_rel);
            worst_bound = worst_bound.min(rep.worst_bound_margin);
        }
    }
    outcome(
        failures == 0,
        format!("{}/{total} traces certified; worst identity rel {worst_id:.2e}, worst bound margin {worst_bound:.3e}", total - failures),
    )
}

fn hessian_signature() -> Outcome {
    let mut ok = true;
    let mut found = Vec::new();
    for n in [1, 2, 3, 5] {
        let m = ModelSpec::circle(n, C64::new(1.0, 0.0)).build().unwrap();
        let h = hessian_f23(&m, &Frame::identity(), &HVec::zeros(n)).unwrap();
        let neg = h.eigenvalues.iter().filter(|&&v| v < -1e-8).count();
        let pos = h.eigenvalues.iter().filter(|&&v| v > 1e-8).count();
        let zero = h.eigenvalues.len() - neg - pos;
        ok &= (neg, zero, pos) == (2 * n, 0, 2 * n);
        found.push(format!("n={n}:({neg},{zero},{pos})"));
    }
    outcome(ok, found.join(" "))
}

fn poincare_polynomial() -> Outcome {
    let mut ok = true;
    let mut found = Vec::new();
    for n in 1..=4 {
        let cap = default_cap(n);
        let series = match circle_example_pipeline(n, C64::new(1.0, 0.0), cap) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        // 1 + t² + … + t^{2n−2}, written out directly
        let expect: Vec<i64> = (0..=cap).map(|d| i64::from(d % 2 == 0 && d < 2 * n)).collect();
        ok &= series == PoincareSeries::from_coefficients(&expect, cap);
        found.push(format!("n={n}: {series}"));
    }
    outcome(ok, found.join("; "))
}

fn critical_identities(points: &[CriticalPoint], m: &ActionModel, f: &Frame, dropped: usize) -> Outcome {
    if points.is_empty() {
        return outcome(false, "no certified critical points");
    }
    let mut worst_ident: f64 = 0.0;
    let mut worst_anti: f64 = 0.0;
    let mut worst_sq: f64 = 0.0;
    let mut acting = 0;
    let mut ok = true;
    for cp in points {
        let id = verify_critical_identities(m, f, cp);
        let scale = id.tolerance / 1e-7;
        worst_ident = worst_ident.max(id.beta2_action.max(id.beta3_action).max(id.bracket) / scale);
        let ac = anticommutator_check(m, f, cp);
        worst_anti = worst_anti.max(ac.anticommutator_rel);
        worst_sq = worst_sq.max(ac.square_rel);
        acting += usize::from(ac.h2_norm.max(ac.h3_norm) > 1e-8);
        ok &= id.beta2_action <= id.tolerance && id.beta3_action <= id.tolerance && id.bracket <= id.tolerance;
        ok &= ac.anticommutator_rel <= 1e-6 && ac.square_rel <= 1e-6;
    }
    outcome(
        ok,
        format!(
            "{} points ({dropped} seeds dropped, {acting} with β₂ or β₃ acting nontrivially); worst scaled identity {worst_ident:.2e}, anticommutator {worst_anti:.2e}, square {worst_sq:.2e}",
            points.len()
        ),
    )
}

fn lifted_kernel(points: &[CriticalPoint], m: &ActionModel) -> Outcome {
    if points.is_empty() {
        return outcome(false, "no certified critical points");
    }
    let mut lines = Vec::new();
    let mut any = false;
    for sign in [EPSILON, -EPSILON] {
        let mut worst_adj: f64 = 0.0;
        let mut worst_ker: f64 = 0.0;
        let mut untrusted = 0;
        let mut ok = true;
        for cp in points {
            match assemble_lifted_hessian_signed(m, cp, sign) {
                Ok(lh) => {
                    let k = check_kernel_containment(&lh);
                    worst_adj = worst_adj.max(lh.adjugate_residual);
                    worst_ker = worst_ker.max(k.worst_kernel_distance);
                    ok &= lh.adjugate_residual <= 1e-8 && k.worst_kernel_distance <= 1e-8;
                }
                Err(_) => {
                    untrusted += 1;
                    ok = false;
                }
            }
        }
        any |= ok;
        lines.push(format!(
            "sign {sign:+}: {} (adjugate {worst_adj:.2e}, kernel {worst_ker:.2e}, untrusted {untrusted})",
            if ok { "certifies" } else { "fails" }
        ));
    }
    outcome(any, format!("{} points; {}", points.len(), lines.join("; ")))
}

fn derivative_oracles() -> Outcome {
    let models: Vec<(&str, ActionModel)> = catalog().into_iter().map(|(n, s)| (n, s.build().unwrap())).collect();
    let results: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(derive_seed(6, k));
            let (_, m) = &models[k as usize % models.len()];
            let f = haar_frame(&mut r);
            let z = gaussian_state(&mut r, m.n(), 1.0);
            (gradient_fd_error(m, &f, &z).unwrap(), hessian_fd_error(m, &f, &z).unwrap())
        })
        .collect();
    let g = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let h = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(g <= 1e-6 && h <= 1e-5, format!("100 pairs; worst gradient rel {g:.2e}, worst hessian rel {h:.2e}"))
}

fn general_frames() -> Outcome {
    let m = ModelSpec::circle_with_c1(2, C64::new(0.0, 0.0), 0.5).build().unwrap();
    let identity_general = check_general_frame(&m, &Frame::identity()).unwrap().is_general();
    let frames: Vec<Frame> = haar_frames(7).take(100).collect();
    let passing = frames.iter().filter(|f| check_general_frame(&m, f).unwrap().is_general()).count();
    let Some(frame) = frames.iter().find(|f| check_general_frame(&m, f).unwrap().is_general()).copied() else {
        return outcome(false, "no Haar frame passed");
    };
    let verdicts: Vec<Option<Semistability>> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(derive_seed(77, k));
            let z0 = gaussian_state(&mut r, m.n(), 1.5);
            let p = project_onto_w(&m, &frame, &z0, 1e-12 * (1.0 + z0.norm_sqr())).ok()?;
            classify_semistable(&m, &frame, &p.z, &FlowOptions::default()).ok().map(|r| r.verdict)
        })
        .collect();
    let semistable = verdicts.iter().filter(|v| **v == Some(Semistability::Semistable)).count();
    outcome(
        !identity_general && passing == 100 && semistable == 100,
        format!(
            "identity frame general: {identity_general}; {passing}/100 Haar frames general; {semistable}/100 W-points semistable"
        ),
    )
}

fn structure_invariants() -> Outcome {
    let models: Vec<(&str, ActionModel)> = catalog().into_iter().map(|(n, s)| (n, s.build().unwrap())).collect();
    let draws = 120u64;
    let pick = |k: u64| &models[k as usize % models.len()].1;
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let equiv = max((0..draws)
        .map(|k| {
            let mut r = rng(derive_seed(81, k));
            let m = pick(k);
            let z = gaussian_state(&mut r, m.n(), 1.0);
            let xi = gaussian_vector(&mut r, m.lie().dim());
            equivariance_residual(m, &xi, (k as f64 + 0.5) / draws as f64, &z).unwrap()
        })
        .collect());
    let holo = max((0..draws)
        .map(|k| {
            let mut r = rng(derive_seed(82, k));
            let m = pick(k);
            let z = gaussian_state(&mut r, m.n(), 1.0);
            let v = gaussian_state(&mut r, m.n(), 1.0);
            holomorphicity_residual(m, &z, &v).unwrap()
        })
        .collect());
    let homog = max((0..draws)
        .map(|k| {
            let m = pick(k);
            let z = gaussian_state(&mut rng(derive_seed(83, k)), m.n(), 1.0);
            homogeneity_residual(m, &z, -2.0 + 4.0 * k as f64 / draws as f64).unwrap()
        })
        .collect());
    let cov = max((0..draws)
        .map(|k| {
            let mut r = rng(derive_seed(84, k));
            let m = pick(k);
            let f = haar_frame(&mut r);
            let z = gaussian_state(&mut r, m.n(), 1.0);
            frame_covariance_residual(m, &f, &z).unwrap()
        })
        .collect());
    let sign = max((0..draws)
        .map(|k| {
            let mut r = rng(derive_seed(85, k));
            let m = pick(k);
            let f = haar_frame(&mut r);
            let z = gaussian_state(&mut r, m.n(), 1.0);
            let v = gaussian_state(&mut r, m.n(), 1.0);
            let xi = gaussian_vector(&mut r, m.lie().dim());
            differential_identity_residual(m, &f, &z, &v, &xi, EPSILON).unwrap()
        })
        .collect());
    let mut ortho_n = 0;
    let mut ortho: f64 = 0.0;
    let mut k = 0u64;
    while ortho_n < draws && k < 4 * draws {
        let m = pick(k);
        if let Some((res, _)) = orthogonality_residual(m, &mut rng(derive_seed(86, k)), 1.0).unwrap() {
            ortho = ortho.max(res);
            ortho_n += 1;
        }
        k += 1;
    }
    let ok = equiv <= 1e-8 && holo <= 1e-10 && homog <= 1e-12 && cov <= 1e-12 && sign <= 1e-10 && ortho <= 1e-8 && ortho_n == draws;
    outcome(
        ok,
        format!(
            "{draws} draws each; equivariance {equiv:.1e}, holomorphic {holo:.1e}, homogeneity {homog:.1e}, frame {cov:.1e}, sign {sign:.1e}, orthogonality {ortho:.1e} ({ortho_n} points)"
        ),
    )
}

/// The cocycle is asserted in its literal form: fiber coordinates changing
/// by the square of the coordinate ratio. The first-power law for the fiber
/// and the squared law for the equations are printed alongside.
fn quadric_blowup() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, q) in QuadricModel::shipped() {
        match verify_cone_structure(&q, 50, 9) {
            Ok(rep) => {
                ok &= rep.fiber_independence == 0.0
                    && rep.product_margin <= PRODUCT_TOL
                    && rep.blowdown_margin <= BLOWDOWN_TOL
                    && rep.squared_fiber_law_margin <= COCYCLE_TOL;
                parts.push(format!(
                    "{name}: fiber {:.0e} product {:.1e} blow-down {:.1e} squared-ratio fiber law {:.1e} \
                     (first-power fiber law {:.1e}, squared equation law {:.1e}; {} overlaps)",
                    rep.fiber_independence,
                    rep.product_margin,
                    rep.blowdown_margin,
                    rep.squared_fiber_law_margin,
                    rep.cocycle_fiber_margin,
                    rep.cocycle_equation_margin,
                    rep.overlap_points
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn flow_closedness() -> Outcome {
    let (end2, frame) = end2_setup();
    let adhm = ModelSpec::adhm(1, 1)
        .with_constants(Constants {
            c1_scalar: Some(0.5),
            c_c_scalar: Some([1.0, 0.0]),
            ..Default::default()
        })
        .build()
        .unwrap();
    let adhm_frame = sample_general_frame(&adhm, 2024).unwrap().frame;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m, f) in [("end(2)", &end2, frame), ("adhm(1,1)", &adhm, adhm_frame)] {
        let mut r = rng(31);
        let starts: Vec<State> = (0..100).map(|_| state_in_ball(&mut r, m.n(), 10.0)).collect();
        match flow_closedness_survey(m, &f, Objective::F23OnV, &starts, &FlowOptions::default()) {
            Ok(s) => {
                let div = s.count(FlowStatus::Diverged);
                ok &= div == 0;
                parts.push(format!("{name}: {div} diverged, sup ρ {:.3e}, {:?}", s.sup_rho, s.counts));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

/// Criteria that cannot hold as stated. They are still run and reported as
/// FAIL, but do not abort the test run.
///
/// 9: the blow-up fiber coordinate changes by the first power of the chart
/// ratio; only the equations of the proper transform change by its square.
const EXPECTED_FAILURES: &[usize] = &[9];

fn main() {
    let mut failed = Vec::new();
    let mut report = |k: usize, name: &str, budget: Duration, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = run();
        let el = t.elapsed();
        let in_time = el <= budget;
        let passed = o.passed && in_time;
        if !passed {
            failed.push(k);
        }
        println!(
            "criterion {k:>2} {} {name}: {} [{:.2}s of {}s{}]",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    };
    let s = Duration::from_secs;
    report(1, "circle Lyapunov certificate", s(60), &mut lyapunov_certificate);
    report(2, "Hessian signature at the origin", s(1), &mut hessian_signature);
    report(3, "circle Poincaré polynomial", s(5), &mut poincare_polynomial);
    let t = Instant::now();
    let (m, f, points, dropped) = end2_critical_points();
    let search_time = t.elapsed();
    report(4, "critical identities on End(2)", s(300), &mut || {
        let o = critical_identities(&points, &m, &f, dropped);
        Outcome {
            detail: format!("{} (search {:.2}s)", o.detail, search_time.as_secs_f64()),
            passed: o.passed && search_time <= s(300),
        }
    });
    report(5, "lifted-matrix kernel", s(60), &mut || lifted_kernel(&points, &m));
    report(6, "gradient and Hessian oracles", s(30), &mut derivative_oracles);
    report(7, "general frames and semistability", s(120), &mut general_frames);
    report(8, "equivariance and structure invariants", s(30), &mut structure_invariants);
    report(9, "quadric blow-up", s(10), &mut quadric_blowup);
    report(10, "flow-closedness survey", s(600), &mut flow_closedness);

    let unexpected: Vec<usize> = failed.iter().copied().filter(|k| !EXPECTED_FAILURES.contains(k)).collect();
    let recovered: Vec<usize> = EXPECTED_FAILURES.iter().copied().filter(|k| !failed.contains(k)).collect();
    println!("{}/10 criteria passed; failed: {failed:?}", 10 - failed.len());
    if !recovered.is_empty() {
        println!("expected failures that passed: {recovered:?}");
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
