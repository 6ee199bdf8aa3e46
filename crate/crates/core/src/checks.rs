//! Residuals of the structural identities every model must satisfy, and
//! finite-difference oracles for the analytic derivatives. Each function
//! evaluates one random draw; callers sweep them.
//!
//! Derivatives of the closed-form moment maps are taken by central
//! differences, which are exact up to rounding for quadratic maps, so they
//! are independent of the quadratic forms used elsewhere.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::flow::projection::project_level;
use crate::flow::grad_f23_from_actions;
use crate::models::{eval_moment, infinitesimal_action, ActionModel, Constants, FramedModel, ModelSpec, MomentValue};
use crate::quaternionic::{rotate_moment, structure_matrices, Frame, HVec, State, C64};
use crate::sampling::{gaussian_state, gaussian_vector};

/// One representative of every catalog family, with central constants where
/// the family admits them.
pub fn catalog() -> Vec<(&'static str, ModelSpec)> {
    let unitary = |c1: f64, cc: [f64; 2]| Constants {
        c1_scalar: Some(c1),
        c_c_scalar: Some(cc),
        ..Default::default()
    };
    vec![
        ("circle-2", ModelSpec::circle_with_c1(2, C64::new(1.0, -0.5), 0.5)),
        (
            "torus-2x3",
            ModelSpec::torus(vec![vec![1, 2, -1], vec![0, 1, 1]]).with_constants(Constants {
                c1: Some(vec![0.3, -0.2]),
                c_c: Some(vec![[0.5, 0.0], [0.0, 1.0]]),
                ..Default::default()
            }),
        ),
        ("hom-2-1", ModelSpec::hom(2, 1).with_constants(unitary(0.25, [0.0, -1.0]))),
        ("end-2", ModelSpec::end(2).with_constants(unitary(0.5, [1.0, 0.0]))),
        ("adhm-1-1", ModelSpec::adhm(1, 1).with_constants(unitary(1.0, [0.5, 0.5]))),
        ("adhm-2-1", ModelSpec::adhm(2, 1)),
        (
            "direct-sum",
            ModelSpec::DirectSum {
                parts: vec![ModelSpec::circle(1, C64::new(0.0, 1.0)), ModelSpec::end(2)],
                constants: Constants::default(),
            },
        ),
        (
            "diagonal",
            ModelSpec::Diagonal {
                parts: vec![ModelSpec::hom(2, 1), ModelSpec::end(2)],
                constants: unitary(0.1, [0.2, 0.0]),
            },
        ),
        (
            "restriction",
            ModelSpec::Restriction {
                inner: Box::new(ModelSpec::hom(2, 2)),
                homomorphism: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]],
                constants: Constants::default(),
            },
        ),
    ]
}

fn moment_diff(a: &MomentValue, b: &MomentValue) -> f64 {
    let d = MomentValue {
        mu1: &a.mu1 - &b.mu1,
        mu_c: &a.mu_c - &b.mu_c,
    };
    d.coefficient_norm()
}

/// Closed-form moment map without its central constants.
fn homogeneous_moment(model: &ActionModel, frame: &Frame, z: &State) -> Result<MomentValue> {
    let m = eval_moment(model, frame, z)?;
    let c = rotate_moment(frame, &model.constants());
    Ok(MomentValue {
        mu1: m.mu1 + c.mu1,
        mu_c: m.mu_c + c.mu_c,
    })
}

/// Central difference of the closed form; exact for quadratics up to rounding.
fn moment_differential(model: &ActionModel, frame: &Frame, z: &State, v: &State) -> Result<MomentValue> {
    let zr = z.to_real();
    let vr = v.to_real();
    let plus = eval_moment(model, frame, &HVec::from_real(&(&zr + &vr)))?;
    let minus = eval_moment(model, frame, &HVec::from_real(&(&zr - &vr)))?;
    Ok(MomentValue {
        mu1: (plus.mu1 - minus.mu1) * 0.5,
        mu_c: (plus.mu_c - minus.mu_c) * C64::new(0.5, 0.0),
    })
}

/// `‖μ(exp(tξ)·z) − Ad*_{exp(tξ)} μ(z)‖ / (1 + ‖z‖²)`.
pub fn equivariance_residual(model: &ActionModel, xi: &DVector<f64>, t: f64, z: &State) -> Result<f64> {
    let f = Frame::identity();
    let txi = xi * t;
    let moved = model.act(&txi, z)?;
    let lhs = eval_moment(model, &f, &moved)?;
    let rhs = model.coadjoint(&txi, &eval_moment(model, &f, z)?)?;
    Ok(moment_diff(&lhs, &rhs) / (1.0 + z.norm_sqr()))
}

/// Largest `|⟨dμ_l(v), ξ⟩ − sign·g(ξ_z, I_l v)|` over `l`, scaled by
/// `1 + ‖z‖‖v‖‖ξ‖`.
pub fn differential_identity_residual(
    model: &ActionModel,
    frame: &Frame,
    z: &State,
    v: &State,
    xi: &DVector<f64>,
    sign: f64,
) -> Result<f64> {
    let dmu = moment_differential(model, frame, z, v)?.triple();
    let xz = infinitesimal_action(model, xi, z)?.to_real();
    let structures = frame.structure_matrices(model.n());
    let vr = v.to_real();
    let scale = 1.0 + z.norm() * v.norm() * xi.norm();
    let mut worst: f64 = 0.0;
    for l in 0..3 {
        let lhs = dmu[l].dot(xi);
        let rhs = sign * xz.dot(&(&structures[l] * &vr));
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// `‖dμ_C(i·v) − √−1·dμ_C(v)‖ / (1 + ‖z‖‖v‖)` in the reference frame.
pub fn holomorphicity_residual(model: &ActionModel, z: &State, v: &State) -> Result<f64> {
    let f = Frame::identity();
    let iv = HVec::from_real(&(&structure_matrices(model.n())[0] * v.to_real()));
    let a = moment_differential(model, &f, z, &iv)?.mu_c;
    let b = moment_differential(model, &f, z, v)?.mu_c * C64::new(0.0, 1.0);
    let diff = (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(diff / (1.0 + z.norm() * v.norm()))
}

/// `‖μ₀(t·z) − t²·μ₀(z)‖ / (1 + t²‖μ₀(z)‖)` for the constant-free closed form.
pub fn homogeneity_residual(model: &ActionModel, z: &State, t: f64) -> Result<f64> {
    let f = Frame::identity();
    let a = homogeneous_moment(model, &f, &z.scale(t))?;
    let b = homogeneous_moment(model, &f, z)?;
    let scaled = MomentValue {
        mu1: &b.mu1 * (t * t),
        mu_c: b.mu_c.map(|c| c * (t * t)),
    };
    Ok(moment_diff(&a, &scaled) / (1.0 + t * t * b.coefficient_norm()))
}

/// Rotated closed form against the frame's own quadratic forms, and against
/// `eval_moment` in the rotated frame; returns the larger residual scaled by
/// `1 + ‖z‖²`.
pub fn frame_covariance_residual(model: &ActionModel, frame: &Frame, z: &State) -> Result<f64> {
    let reference = eval_moment(model, &Frame::identity(), z)?;
    let rotated = rotate_moment(frame, &reference);
    let direct = eval_moment(model, frame, z)?;
    let forms = FramedModel::new(model, *frame).moment(&z.to_real());
    let scale = 1.0 + z.norm_sqr();
    Ok(moment_diff(&rotated, &direct).max(moment_diff(&rotated, &forms)) / scale)
}

/// Projects a random point onto `μ₁⁻¹(0)` and returns
/// `|g(jγ_z, kδ_z)| / (‖γ_z‖‖δ_z‖)` together with the `μ₁` residual reached.
/// `None` if the projection fails or a vector field vanishes.
pub fn orthogonality_residual<R: Rng + ?Sized>(model: &ActionModel, rng: &mut R, scale: f64) -> Result<Option<(f64, f64)>> {
    let fm = FramedModel::new(model, Frame::identity());
    let z0 = gaussian_state(rng, model.n(), scale).to_real();
    let Ok((z, _, res)) = project_level(&fm, &z0, &[0], 1e-13 * (1.0 + z0.norm_squared())) else {
        return Ok(None);
    };
    let z = HVec::from_real(&z);
    let dim = model.lie().dim();
    let gz = infinitesimal_action(model, &gaussian_vector(rng, dim), &z)?.to_real();
    let dz = infinitesimal_action(model, &gaussian_vector(rng, dim), &z)?.to_real();
    let denom = gz.norm() * dz.norm();
    if denom < 1e-12 {
        return Ok(None);
    }
    let [_, j, k] = structure_matrices(model.n());
    Ok(Some(((&j * gz).dot(&(&k * dz)).abs() / denom, res)))
}

/// Central-difference step used by the derivative oracles.
pub fn fd_step(z: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + z.norm())
}

/// Relative error of both analytic gradients of `f₂₃` (quadratic forms and
/// the infinitesimal-action expression) against central differences.
pub fn gradient_fd_error(model: &ActionModel, frame: &Frame, z: &State) -> Result<f64> {
    let fm = FramedModel::new(model, *frame);
    let zr = z.to_real();
    let h = fd_step(&zr);
    let fd = DVector::from_fn(zr.len(), |k, _| {
        let mut p = zr.clone();
        let mut m = zr.clone();
        p[k] += h;
        m[k] -= h;
        (fm.f23(&p) - fm.f23(&m)) / (2.0 * h)
    });
    let a = fm.grad_f23(&zr);
    let b = grad_f23_from_actions(model, frame, z)?.to_real();
    let denom = fd.norm().max(1e-12 * (1.0 + zr.norm().powi(3)));
    Ok(((&a - &fd).norm() / denom).max((&b - &fd).norm() / denom))
}

/// Relative error of the analytic Hessian of `f₂₃` against central
/// differences of the analytic gradient.
pub fn hessian_fd_error(model: &ActionModel, frame: &Frame, z: &State) -> Result<f64> {
    let fm = FramedModel::new(model, *frame);
    let zr = z.to_real();
    let h = fd_step(&zr);
    let d = zr.len();
    let mut fd = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut p = zr.clone();
        let mut m = zr.clone();
        p[k] += h;
        m[k] -= h;
        fd.set_column(k, &((fm.grad_f23(&p) - fm.grad_f23(&m)) / (2.0 * h)));
    }
    let an = fm.hessian_components_sq(&zr, &[1, 2]);
    Ok((&an - &fd).norm() / fd.norm().max(1e-12 * (1.0 + zr.norm_squared())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{haar_frame, rng};

    #[test]
    fn catalog_builds() {
        for (name, spec) in catalog() {
            let m = spec.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(m.n() > 0, "{name}");
        }
    }

    #[test]
    fn wrong_sign_is_detected() {
        let mut r = rng(11);
        let m = ModelSpec::end(2).build().unwrap();
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let v = gaussian_state(&mut r, m.n(), 1.0);
        let xi = gaussian_vector(&mut r, 4);
        let f = haar_frame(&mut r);
        assert!(differential_identity_residual(&m, &f, &z, &v, &xi, crate::EPSILON).unwrap() < 1e-12);
        assert!(differential_identity_residual(&m, &f, &z, &v, &xi, -crate::EPSILON).unwrap() > 1e-3);
    }

    #[test]
    fn orthogonality_fails_off_the_level() {
        // off μ₁⁻¹(0) the pairing is generically nonzero for a nonabelian group
        let m = ModelSpec::end(2).build().unwrap();
        let mut r = rng(4);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let g = infinitesimal_action(&m, &gaussian_vector(&mut r, 4), &z).unwrap().to_real();
        let d = infinitesimal_action(&m, &gaussian_vector(&mut r, 4), &z).unwrap().to_real();
        let [_, j, k] = structure_matrices(m.n());
        assert!((&j * &g).dot(&(&k * &d)).abs() / (g.norm() * d.norm()) > 1e-4);
    }
}
