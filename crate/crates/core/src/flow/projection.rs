//! Gauss–Newton projection onto level sets of moment components.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pinv;
use crate::models::{ActionModel, FramedModel};
use crate::quaternionic::{Frame, HVec, State};

const RANK_CUTOFF: f64 = 1e-10;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 40;

/// Outcome of a projection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Projection {
    pub z: State,
    pub iterations: usize,
    pub distance: f64,
    pub residual: f64,
}

/// Stacked pairings and Jacobian rows of the selected moment components.
fn residual_system(fm: &FramedModel<'_>, z: &DVector<f64>, comps: &[usize]) -> (DVector<f64>, DMatrix<f64>, f64) {
    let pd = fm.point_data(z);
    let dim = fm.dim();
    let mut r = DVector::zeros(dim * comps.len());
    let mut jac = DMatrix::zeros(dim * comps.len(), z.len());
    let mut norm_sq = 0.0;
    for (i, &l) in comps.iter().enumerate() {
        r.rows_mut(i * dim, dim).copy_from(&pd.pairings[l]);
        jac.rows_mut(i * dim, dim)
            .copy_from(&pd.images.columns(l * dim, dim).transpose());
        norm_sq += fm.model().lie().coalgebra_norm_sqr(&pd.pairings[l]);
    }
    (r, jac, norm_sq.sqrt())
}

/// Gauss–Newton on `μ_l(z) = 0` for the components `comps` (0-based, in the
/// frame of `fm`), with pseudoinverse steps damped by halving. Returns once
/// the coalgebra norm of the residual is `≤ tol`.
pub fn project_level(fm: &FramedModel<'_>, z0: &DVector<f64>, comps: &[usize], tol: f64) -> Result<(DVector<f64>, usize, f64)> {
    let mut z = z0.clone();
    let (mut r, mut jac, mut res) = residual_system(fm, &z, comps);
    let mut it = 0;
    while res > tol {
        if it == MAX_ITER {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        let (jp, _) = pinv(&jac, RANK_CUTOFF);
        let step = -(jp * &r);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &z + &step * alpha;
            let (tr, tj, tres) = residual_system(fm, &trial, comps);
            if tres < res {
                z = trial;
                r = tr;
                jac = tj;
                res = tres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        it += 1;
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
    }
    Ok((z, it, res))
}

/// Projects onto `W = μ_C⁻¹(0)` in the given frame.
pub fn project_onto_w(model: &ActionModel, frame: &Frame, z0: &State, tol: f64) -> Result<Projection> {
    let fm = FramedModel::new(model, *frame);
    project_onto_w_framed(&fm, z0, tol)
}

pub fn project_onto_w_framed(fm: &FramedModel<'_>, z0: &State, tol: f64) -> Result<Projection> {
    if z0.dim() != fm.model().n() {
        return Err(Error::DimensionMismatch {
            expected: fm.model().n(),
            got: z0.dim(),
        });
    }
    let start = z0.to_real();
    let (z, iterations, residual) = project_level(fm, &start, &[1, 2], tol)?;
    Ok(Projection {
        distance: (&z - &start).norm(),
        z: HVec::from_real(&z),
        iterations,
        residual,
    })
}

/// Orthogonal projection of `v` onto `ker J` using the numerical rank of `J`.
/// Returns the projected vector and the rank used.
pub fn tangent_projection(jac: &DMatrix<f64>, v: &DVector<f64>) -> (DVector<f64>, usize) {
    let (jp, rank) = pinv(jac, RANK_CUTOFF);
    (v - jp * (jac * v), rank)
}
