//! Critical points of `f₂₃ = ‖μ₂‖² + ‖μ₃‖²` and their analysis.
//!
//! At a critical point the algebra elements `β_l` (the values `μ_l(z)` under
//! `𝔨 ≅ 𝔨*`) satisfy `(β₂)_z = (β₃)_z = 0` and `[β₂, β₃] = 0`. The Hessian of
//! `f₂₃` lifts to the block matrix `M` on `𝔨^{⊕4}` built from
//! `A_z(a)·b = g(a_z, b_z)` and `B_l = ad β_l`; its kernel lies in
//! `L = 𝔨 ⊕ stab(β₂,β₃)^{⊕3}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate_descent, FlowOptions, FlowStatus, Objective};
use crate::linalg::{distance_to_span, null_space, null_space_below, pinv, spectral_norm, sym_eigen_sorted};
use crate::models::{ActionModel, FramedModel};
use crate::quaternionic::{Frame, HVec, State};

const NEWTON_ITERS: usize = 40;
const KERNEL_CUTOFF: f64 = 1e-8;

/// Certification tolerance for the gradient norm, `1e-10·(1 + ‖z‖³)`.
pub fn gradient_tolerance(z: &State) -> f64 {
    1e-10 * (1.0 + z.norm().powi(3))
}

/// Tolerance for the vanishing identities, `1e-7·(1 + ‖z‖³)`.
pub fn identity_tolerance(z: &State) -> f64 {
    1e-7 * (1.0 + z.norm().powi(3))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub z: State,
    /// `β₁, β₂, β₃` as Lie algebra vectors.
    pub betas: [DVector<f64>; 3],
    pub f: f64,
    pub grad_norm: f64,
    /// `‖(β₂)_z‖`, `‖(β₃)_z‖`.
    pub action_norms: [f64; 2],
    /// `‖[β₂, β₃]‖` in the invariant norm.
    pub bracket_norm: f64,
    pub seed: usize,
}

impl CriticalPoint {
    /// Evaluates all recorded quantities at `z`.
    pub fn at(model: &ActionModel, frame: &Frame, z: &State, seed: usize) -> Result<Self> {
        let fm = FramedModel::new(model, *frame);
        let zr = z.to_real();
        let pd = fm.point_data(&zr);
        let betas = fm.betas(&pd);
        let grad = fm.grad_component_sq(&pd, 1) + fm.grad_component_sq(&pd, 2);
        let act = |b: &DVector<f64>| (model.generator_real(b) * &zr).norm();
        let bracket = model.lie().bracket(&betas[1], &betas[2])?;
        let bracket_norm = (bracket.transpose() * model.lie().gram() * &bracket)[0].max(0.0).sqrt();
        Ok(Self {
            z: z.clone(),
            f: fm.f23_from(&pd),
            grad_norm: grad.norm(),
            action_norms: [act(&betas[1]), act(&betas[2])],
            bracket_norm,
            betas,
            seed,
        })
    }

    pub fn is_certified(&self) -> bool {
        self.grad_norm <= gradient_tolerance(&self.z)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticalOptions {
    pub flow: FlowOptions,
    /// Two points with all invariants within this distance are merged.
    pub dedup_tol: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            dedup_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DroppedSeed {
    pub seed: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CriticalSearch {
    /// Certified, deduplicated critical points in seed order.
    pub points: Vec<CriticalPoint>,
    /// Every certified point before deduplication.
    pub all: Vec<CriticalPoint>,
    pub dropped: Vec<DroppedSeed>,
}

/// Newton iteration on `grad f₂₃ = 0` with pseudoinverse steps, accepting a
/// step only when it lowers the gradient norm.
pub fn polish(fm: &FramedModel<'_>, z0: &DVector<f64>, tol: impl Fn(&DVector<f64>) -> f64) -> Result<DVector<f64>> {
    let mut z = z0.clone();
    let mut g = fm.grad_f23(&z);
    for _ in 0..NEWTON_ITERS {
        if g.norm() <= tol(&z) {
            return Ok(z);
        }
        let h = fm.hessian_components_sq(&z, &[1, 2]);
        let (hp, _) = pinv(&h, 1e-10);
        let step = -(hp * &g);
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = &z + &step * alpha;
            let tg = fm.grad_f23(&trial);
            if tg.norm() < g.norm() {
                z = trial;
                g = tg;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if g.norm() <= tol(&z) {
        Ok(z)
    } else {
        Err(Error::NoConvergence {
            iterations: NEWTON_ITERS,
            residual: g.norm(),
        })
    }
}

/// Orbit-invariant signature used for deduplication: `f`, `‖β_l‖` and the
/// spectrum of `A_z`. Points of the zero level all belong to the minimum
/// and share one signature.
fn signature(model: &ActionModel, cp: &CriticalPoint) -> Vec<f64> {
    if cp.f <= 1e-12 * (1.0 + cp.z.norm_sqr()).powi(2) {
        return vec![0.0];
    }
    let lie = model.lie();
    let mut sig = vec![cp.f];
    for b in &cp.betas {
        sig.push((b.transpose() * lie.gram() * b)[0].max(0.0).sqrt());
    }
    let a = a_gram(model, &cp.z);
    let (vals, _) = sym_eigen_sorted(&a);
    sig.extend(vals);
    sig
}

/// Descends `f₂₃` from every seed, polishes with Newton, certifies and
/// deduplicates by invariants.
pub fn find_critical_points(model: &ActionModel, frame: &Frame, seeds: &[State], opts: &CriticalOptions) -> Result<CriticalSearch> {
    let fm = FramedModel::new(model, *frame);
    let outcomes: Vec<std::result::Result<CriticalPoint, DroppedSeed>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, z0)| {
            let drop = |reason: String| DroppedSeed { seed: k, reason };
            let trace = integrate_descent(model, frame, Objective::F23OnV, z0, &opts.flow).map_err(|e| drop(e.to_string()))?;
            if trace.status == FlowStatus::Diverged {
                return Err(drop("descent diverged".into()));
            }
            let zr = trace.last().z.to_real();
            let tol = |z: &DVector<f64>| 1e-10 * (1.0 + z.norm().powi(3));
            let polished = polish(&fm, &zr, tol).map_err(|e| drop(format!("polish failed: {e}")))?;
            let cp = CriticalPoint::at(model, frame, &HVec::from_real(&polished), k).map_err(|e| drop(e.to_string()))?;
            if !cp.is_certified() {
                return Err(drop(format!("gradient norm {:e} above tolerance", cp.grad_norm)));
            }
            Ok(cp)
        })
        .collect();
    let mut search = CriticalSearch::default();
    let mut sigs: Vec<Vec<f64>> = Vec::new();
    for o in outcomes {
        match o {
            Ok(cp) => {
                let sig = signature(model, &cp);
                let dup = sigs.iter().any(|s| {
                    s.len() == sig.len() && s.iter().zip(&sig).all(|(a, b)| (a - b).abs() <= opts.dedup_tol * (1.0 + a.abs()))
                });
                if !dup {
                    sigs.push(sig);
                    search.points.push(cp.clone());
                }
                search.all.push(cp);
            }
            Err(d) => {
                log::info!("seed {} dropped: {}", d.seed, d.reason);
                search.dropped.push(d);
            }
        }
    }
    Ok(search)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub grad_norm: f64,
    pub beta2_action: f64,
    pub beta3_action: f64,
    pub bracket: f64,
    /// `|g((β₂)_z, i'(β₃)_z)|`.
    pub orthogonality: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `(β₂)_z = (β₃)_z = 0`, `[β₂, β₃] = 0` and the orthogonality of
/// `(β₂)_z` and `i(β₃)_z`.
pub fn verify_critical_identities(model: &ActionModel, frame: &Frame, cp: &CriticalPoint) -> IdentityReport {
    let zr = cp.z.to_real();
    let a2 = model.generator_real(&cp.betas[1]) * &zr;
    let a3 = model.generator_real(&cp.betas[2]) * &zr;
    let i_rot = &frame.structure_matrices(model.n())[0];
    let orthogonality = a2.dot(&(i_rot * a3)).abs();
    let tolerance = identity_tolerance(&cp.z);
    let passed = cp.action_norms[0] <= tolerance
        && cp.action_norms[1] <= tolerance
        && cp.bracket_norm <= tolerance
        && orthogonality <= tolerance;
    IdentityReport {
        grad_norm: cp.grad_norm,
        beta2_action: cp.action_norms[0],
        beta3_action: cp.action_norms[1],
        bracket: cp.bracket_norm,
        orthogonality,
        tolerance,
        passed,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HessianData {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub zero_tol: f64,
    /// Counts of negative, zero and positive eigenvalues.
    pub inertia: (usize, usize, usize),
    pub symmetry_residual: f64,
}

impl HessianData {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let symmetry_residual = (&m - m.transpose()).norm();
        let sym = 0.5 * (&m + m.transpose());
        let (eigenvalues, _) = sym_eigen_sorted(&sym);
        let scale = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let zero_tol = 1e-8 * scale;
        let neg = eigenvalues.iter().filter(|&&v| v < -zero_tol).count();
        let pos = eigenvalues.iter().filter(|&&v| v > zero_tol).count();
        Self {
            inertia: (neg, eigenvalues.len() - neg - pos, pos),
            matrix: sym,
            eigenvalues,
            zero_tol,
            symmetry_residual,
        }
    }
}

/// Exact Hessian of `f₂₃` at `z`.
pub fn hessian_f23(model: &ActionModel, frame: &Frame, z: &State) -> Result<HessianData> {
    if z.dim() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: z.dim(),
        });
    }
    let fm = FramedModel::new(model, *frame);
    Ok(HessianData::from_matrix(fm.hessian_components_sq(&z.to_real(), &[1, 2])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseIndex {
    pub index: usize,
    pub nullity: usize,
    /// Odd indices contradict the even codimension of the strata and are
    /// flagged as anomalies.
    pub even: bool,
}

pub fn morse_index(h: &HessianData) -> MorseIndex {
    let (index, nullity, _) = h.inertia;
    MorseIndex {
        index,
        nullity,
        even: index % 2 == 0,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnticommutatorReport {
    /// `‖H₂H₃ + H₃H₂‖` relative to `scale`.
    pub anticommutator_rel: f64,
    /// `‖H² − H₂² − H₃²‖` relative to `scale`, with `H = H₂ + H₃`.
    pub square_rel: f64,
    /// `max(‖H₂‖·‖H₃‖, κ²·‖β₂‖·‖β₃‖)` with `κ` the largest generator norm:
    /// the a priori size of the product, which stays meaningful when
    /// central `β_l` make `H_l` vanish.
    pub scale: f64,
    pub h2_norm: f64,
    pub h3_norm: f64,
}

/// Hessians of `z ↦ ⟨μ_l(z), β_l⟩` for `l = 2, 3`.
pub fn partial_hessians(model: &ActionModel, frame: &Frame, cp: &CriticalPoint) -> (DMatrix<f64>, DMatrix<f64>) {
    let fm = FramedModel::new(model, *frame);
    (fm.form_combination(1, &cp.betas[1]), fm.form_combination(2, &cp.betas[2]))
}

pub fn anticommutator_check(model: &ActionModel, frame: &Frame, cp: &CriticalPoint) -> AnticommutatorReport {
    let (h2, h3) = partial_hessians(model, frame, cp);
    let kappa = model.rep_real().iter().map(|x| x.norm()).fold(0.0, f64::max);
    let a_priori = kappa * kappa * lie_norm(model, &cp.betas[1]) * lie_norm(model, &cp.betas[2]);
    let scale = (h2.norm() * h3.norm()).max(a_priori).max(f64::MIN_POSITIVE);
    let anti = &h2 * &h3 + &h3 * &h2;
    let h = &h2 + &h3;
    let sq = &h * &h - &h2 * &h2 - &h3 * &h3;
    AnticommutatorReport {
        anticommutator_rel: anti.norm() / scale,
        square_rel: sq.norm() / scale,
        scale,
        h2_norm: h2.norm(),
        h3_norm: h3.norm(),
    }
}

fn lie_norm(model: &ActionModel, v: &DVector<f64>) -> f64 {
    (v.transpose() * model.lie().gram() * v)[0].max(0.0).sqrt()
}

/// Gram matrix `g(X_a z, X_b z)`.
pub fn a_gram(model: &ActionModel, z: &State) -> DMatrix<f64> {
    let zr = z.to_real();
    let dim = model.lie().dim();
    let mut cols = DMatrix::zeros(zr.len(), dim);
    for (a, x) in model.rep_real().iter().enumerate() {
        cols.set_column(a, &(x * &zr));
    }
    cols.transpose() * cols
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftedHessian {
    /// Sign applied to the `β_l` (`+1` is the crate convention).
    pub sign: f64,
    pub a: DMatrix<f64>,
    pub b: [DMatrix<f64>; 3],
    pub m: DMatrix<f64>,
    pub m_prime: DMatrix<f64>,
    pub m_prime_adj: DMatrix<f64>,
    /// Orthonormal basis of `stab(β₂, β₃) = ker B₂ ∩ ker B₃`.
    pub stab: DMatrix<f64>,
    /// Orthonormal basis of `L = 𝔨 ⊕ stab^{⊕3}` in `𝔨^{⊕4}`.
    pub l_basis: DMatrix<f64>,
    pub commutation_residual: f64,
    /// Relative residual of `M′_adj·M′` against the closed-form product.
    pub adjugate_residual: f64,
    /// Largest distance of a unit vector of `ker A_z` to `stab(β₂, β₃)`.
    pub a_kernel_outside_stab: f64,
    /// Smallest eigenvalue of the symmetrised `G A_z` (PSD expected).
    pub a_min_eigenvalue: f64,
}

fn blocks(rows: &[[&DMatrix<f64>; 4]], d: usize) -> DMatrix<f64> {
    let r = rows.len();
    let mut out = DMatrix::zeros(r * d, 4 * d);
    for (i, row) in rows.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            out.view_mut((i * d, j * d), (d, d)).copy_from(*blk);
        }
    }
    out
}

fn comm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Builds `A_z`, `B_l`, the lifted matrix `M`, its lower block `M′`, the
/// adjugate `M′_adj` and the subspace `L`. Fails with the margins when the
/// commutation hypotheses are not met to `1e-8` relative.
pub fn assemble_lifted_hessian(model: &ActionModel, cp: &CriticalPoint) -> Result<LiftedHessian> {
    assemble_lifted_hessian_signed(model, cp, 1.0)
}

pub fn assemble_lifted_hessian_signed(model: &ActionModel, cp: &CriticalPoint, sign: f64) -> Result<LiftedHessian> {
    let lie = model.lie();
    let d = lie.dim();
    let a_g = a_gram(model, &cp.z);
    let a = lie.gram_inv() * &a_g;
    let b: [DMatrix<f64>; 3] = [0, 1, 2].map(|l| lie.ad_matrix(&(&cp.betas[l] * sign)).expect("dimension checked"));
    let scale = 1.0 + spectral_norm(&a).max(b.iter().map(spectral_norm).fold(0.0, f64::max));
    let scale = scale * scale;
    let commutation_residual = [
        comm(&a, &b[1]),
        comm(&a, &b[2]),
        comm(&b[0], &b[1]),
        comm(&b[0], &b[2]),
        comm(&b[1], &b[2]),
    ]
    .iter()
    .map(|c| c.norm())
    .fold(0.0, f64::max)
        / scale;
    if commutation_residual > 1e-8 {
        return Err(Error::Untrusted(format!(
            "commutation residual {commutation_residual:e} exceeds 1e-8"
        )));
    }
    let z = DMatrix::zeros(d, d);
    let neg = |m: &DMatrix<f64>| -m;
    let (b1, b2, b3) = (&b[0], &b[1], &b[2]);
    let (nb1, nb2, nb3) = (neg(b1), neg(b2), neg(b3));
    let (b3x2, nb2x2) = (b3 * 2.0, b2 * -2.0);
    let m = blocks(
        &[
            [&z, &z, &nb2, &nb3],
            [&z, &z, &nb3, b2],
            [&z, &b3x2, &a, &nb1],
            [&z, &nb2x2, b1, &a],
        ],
        d,
    );
    let m_prime = m.view((d, d), (3 * d, 3 * d)).into_owned();
    let mut m_prime_adj = DMatrix::zeros(3 * d, 3 * d);
    let adj_blocks = [
        [&a * &a + b1 * b1, b1 * b2 + &a * b3, b1 * b3 - &a * b2],
        [(b1 * b2 - &a * b3) * 2.0, b2 * b2 * 2.0, b2 * b3 * 2.0],
        [(b1 * b3 + &a * b2) * 2.0, b2 * b3 * 2.0, b3 * b3 * 2.0],
    ];
    for (i, row) in adj_blocks.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            m_prime_adj.view_mut((i * d, j * d), (d, d)).copy_from(blk);
        }
    }
    let diag = &a * (b2 * b2 + b3 * b3) * 2.0;
    let off = &(b1 * &a - &a * b1);
    let mut expected = DMatrix::zeros(3 * d, 3 * d);
    for k in 0..3 {
        expected.view_mut((k * d, k * d), (d, d)).copy_from(&diag);
    }
    expected.view_mut((0, d), (d, d)).copy_from(&(off * b2));
    expected.view_mut((0, 2 * d), (d, d)).copy_from(&(off * b3));
    let product = &m_prime_adj * &m_prime;
    let adjugate_residual =
        (&product - &expected).norm() / (m_prime_adj.norm() * m_prime.norm() + f64::MIN_POSITIVE);

    let mut stacked = DMatrix::zeros(2 * d, d);
    stacked.view_mut((0, 0), (d, d)).copy_from(b2);
    stacked.view_mut((d, 0), (d, d)).copy_from(b3);
    // Central β act by zero, so B_l may be pure rounding noise: measure its
    // kernel against the size of β, not against B itself.
    let beta_scale = 1.0 + lie_norm(model, &cp.betas[1]) + lie_norm(model, &cp.betas[2]);
    let stab = null_space_below(&stacked, KERNEL_CUTOFF * beta_scale);
    let s = stab.ncols();
    let mut l_basis = DMatrix::zeros(4 * d, d + 3 * s);
    l_basis.view_mut((0, 0), (d, d)).copy_from(&DMatrix::identity(d, d));
    for k in 0..3 {
        l_basis.view_mut(((k + 1) * d, d + k * s), (d, s)).copy_from(&stab);
    }

    let ker_a = null_space(&a_g, KERNEL_CUTOFF);
    let a_kernel_outside_stab = (0..ker_a.ncols())
        .map(|c| distance_to_span(&ker_a.column(c).into_owned(), &stab))
        .fold(0.0, f64::max);
    let (a_eigs, _) = sym_eigen_sorted(&a_g);
    Ok(LiftedHessian {
        sign,
        a,
        b,
        m,
        m_prime,
        m_prime_adj,
        stab,
        l_basis,
        commutation_residual,
        adjugate_residual,
        a_kernel_outside_stab,
        a_min_eigenvalue: a_eigs.first().copied().unwrap_or(0.0),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel_dim: usize,
    pub worst_kernel_distance: f64,
    /// Dimension of `φ⁻¹(L)`.
    pub preimage_dim: usize,
    pub worst_preimage_distance: f64,
    pub l_dim: usize,
    pub contained: bool,
}

/// Checks `ker M ⊆ L` and the stronger `φ⁻¹(L) ⊆ L`, where
/// `φ⁻¹(L) = ker(P_{L⊥} M)`.
pub fn check_kernel_containment(lh: &LiftedHessian) -> KernelReport {
    let kernel = null_space(&lh.m, KERNEL_CUTOFF);
    let worst = |basis: &DMatrix<f64>| {
        (0..basis.ncols())
            .map(|c| distance_to_span(&basis.column(c).into_owned(), &lh.l_basis))
            .fold(0.0, f64::max)
    };
    let n = lh.m.nrows();
    let proj_perp = DMatrix::identity(n, n) - &lh.l_basis * lh.l_basis.transpose();
    let preimage = null_space(&(proj_perp * &lh.m), KERNEL_CUTOFF);
    let worst_kernel_distance = worst(&kernel);
    let worst_preimage_distance = worst(&preimage);
    KernelReport {
        kernel_dim: kernel.ncols(),
        worst_kernel_distance,
        preimage_dim: preimage.ncols(),
        worst_preimage_distance,
        l_dim: lh.l_basis.ncols(),
        contained: worst_kernel_distance <= 1e-8 && worst_preimage_distance <= 1e-8,
    }
}
