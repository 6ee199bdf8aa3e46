//! Subtorus fixed-point data of torus actions and the general-frame test.
//!
//! For a torus acting on `H^n = ⊕ H_{a_k}` the fixed loci of subtori are
//! coordinate subspaces. Each relevant subtorus `T_j` is the annihilator of a
//! flat of the weight configuration; on its fixed subspace `Z_j` the pairing
//! `⟨μ(z), γ⟩`, `γ ∈ Lie(T_j)`, does not depend on `z`. A frame is general
//! when every nonzero such constant keeps a nonzero complex part after
//! rotation.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::models::{eval_moment, maximal_torus, torus_weights, ActionModel};
use crate::quaternionic::{Frame, HVec, C64};
use crate::sampling::{haar_frames, gaussian_state};

/// Below this, a pairing constant counts as zero.
const RHO_ZERO: f64 = 1e-13;
/// Relative threshold for a rotated complex part to count as nonzero.
const COMPLEX_REL: f64 = 1e-12;
const COMPLEX_ABS: f64 = 1e-14;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

type Q = Ratio<i64>;

/// Row echelon form over the rationals; returns the reduced rows and pivot
/// columns.
fn rref(rows: &[Vec<i64>], width: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut m: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Q::from_integer(v)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..width {
        let Some(p) = (row..m.len()).find(|&i| m[i][col] != Q::from_integer(0)) else {
            continue;
        };
        m.swap(row, p);
        let inv = Q::from_integer(1) / m[row][col];
        for v in m[row].iter_mut() {
            *v *= inv;
        }
        for i in 0..m.len() {
            if i != row && m[i][col] != Q::from_integer(0) {
                let f = m[i][col];
                let pivot_row = m[row].clone();
                for (v, p) in m[i].iter_mut().zip(pivot_row) {
                    *v -= f * p;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    m.truncate(row);
    (m, pivots)
}

fn rank(rows: &[Vec<i64>], width: usize) -> usize {
    rref(rows, width).1.len()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Integral primitive basis of `{γ : ⟨a, γ⟩ = 0 for all rows a}`.
fn annihilator(rows: &[Vec<i64>], width: usize) -> Vec<Vec<i64>> {
    let (m, pivots) = rref(rows, width);
    let free: Vec<usize> = (0..width).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::from_integer(0); width];
            v[f] = Q::from_integer(1);
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f];
            }
            let lcm = v.iter().fold(1i64, |l, q| l / gcd(l, *q.denom()) * q.denom());
            let ints: Vec<i64> = v.iter().map(|q| (*q * lcm).to_integer()).collect();
            let g = ints.iter().fold(0, |g, &x| gcd(g, x)).max(1);
            ints.iter().map(|x| x / g).collect()
        })
        .collect()
}

/// Fixed-point datum of one subtorus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtorusDatum {
    /// Integral basis of `Lie(T_j)` in coordinates of `Lie(T)`.
    pub generators: Vec<Vec<i64>>,
    /// Quaternionic coordinates `k` spanning `Z_j`.
    pub fixed_coordinates: Vec<usize>,
    /// `⟨μ(Z_j), γ⟩ ∈ R³` for each generator.
    pub paired: Vec<[f64; 3]>,
    /// Operator norm of `γ ↦ ⟨μ(Z_j), γ⟩` for the invariant inner product.
    pub rho: f64,
}

impl SubtorusDatum {
    /// Generator with the largest paired constant (first on ties); `None`
    /// when every constant vanishes.
    pub fn distinguished(&self) -> Option<usize> {
        if self.rho <= RHO_ZERO {
            return None;
        }
        let norms: Vec<f64> = self.paired.iter().map(|p| norm3(p)).collect();
        let best = norms.iter().cloned().fold(0.0, f64::max);
        norms.iter().position(|&v| v == best)
    }
}

fn norm3(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Subtorus data of a torus model acting diagonally with integral weights.
pub fn enumerate_subtorus_data(model: &ActionModel) -> Result<Vec<SubtorusDatum>> {
    let weights = torus_weights(model)?;
    let r = weights.len();
    let n = model.n();
    if n > 24 {
        return Err(Error::Unsupported("flat enumeration beyond 24 coordinates".into()));
    }
    // column k is the weight a_k ∈ Z^r
    let cols: Vec<Vec<i64>> = (0..n).map(|k| weights.iter().map(|row| row[k]).collect()).collect();
    let lie = model.lie();
    let base = eval_moment(model, &Frame::identity(), &HVec::zeros(n))?.triple();

    let mut seen: Vec<u32> = Vec::new();
    let mut out = Vec::new();
    for subset in 0u32..(1u32 << n) {
        let chosen: Vec<Vec<i64>> = (0..n)
            .filter(|k| subset & (1 << k) != 0)
            .map(|k| cols[k].clone())
            .collect();
        let rk = rank(&chosen, r);
        if rk >= r {
            continue;
        }
        // closure: every weight in the span of the chosen ones
        let mut flat = 0u32;
        for (k, a) in cols.iter().enumerate() {
            let mut ext = chosen.clone();
            ext.push(a.clone());
            if rank(&ext, r) == rk {
                flat |= 1 << k;
            }
        }
        if seen.contains(&flat) {
            continue;
        }
        seen.push(flat);
        let span_rows: Vec<Vec<i64>> = (0..n).filter(|k| flat & (1 << k) != 0).map(|k| cols[k].clone()).collect();
        let generators = annihilator(&span_rows, r);
        let paired: Vec<[f64; 3]> = generators
            .iter()
            .map(|g| {
                let gv = DVector::from_iterator(r, g.iter().map(|&v| v as f64));
                std::array::from_fn(|l| base[l].dot(&gv))
            })
            .collect();
        // ρ = ‖C Γ N^{-1/2}‖ with N = Γᵀ G Γ
        let m = generators.len();
        let gamma = DMatrix::from_fn(r, m, |a, i| generators[i][a] as f64);
        let c = DMatrix::from_fn(3, m, |l, i| paired[i][l]);
        let gram = gamma.transpose() * lie.gram() * &gamma;
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("degenerate subtorus basis".into()))?;
        let l_inv_t = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("degenerate subtorus basis".into()))?
            .transpose();
        let rho = spectral_norm(&(c * l_inv_t));
        out.push(SubtorusDatum {
            generators,
            fixed_coordinates: (0..n).filter(|k| flat & (1 << k) != 0).collect(),
            paired,
            rho,
        });
    }
    Ok(out)
}

/// Largest deviation of `⟨μ(z), γ⟩` from the recorded constant over random
/// points of `Z_j`.
pub fn constancy_residual<R: Rng + ?Sized>(
    model: &ActionModel,
    datum: &SubtorusDatum,
    rng: &mut R,
    samples: usize,
) -> Result<f64> {
    let n = model.n();
    let r = model.lie().dim();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let g = gaussian_state(rng, n, 1.0);
        let mut z = HVec::zeros(n);
        for &k in &datum.fixed_coordinates {
            z.x[k] = g.x[k];
            z.y[k] = g.y[k];
        }
        let t = eval_moment(model, &Frame::identity(), &z)?.triple();
        for (gen, expect) in datum.generators.iter().zip(&datum.paired) {
            let gv = DVector::from_iterator(r, gen.iter().map(|&v| v as f64));
            for l in 0..3 {
                worst = worst.max((t[l].dot(&gv) - expect[l]).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum FrameVerdict {
    General,
    NotGeneral { witness: usize },
}

/// Verdict with the data it was based on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameReport {
    pub verdict: FrameVerdict,
    /// Number of data with `ρ_j > 0`.
    pub constraints: usize,
    /// Smallest rotated complex-part magnitude over the constraints.
    pub min_complex_part: Option<f64>,
    pub data: Vec<SubtorusDatum>,
}

impl FrameReport {
    pub fn is_general(&self) -> bool {
        self.verdict == FrameVerdict::General
    }
}

fn reduced_torus(model: &ActionModel) -> Result<ActionModel> {
    if model.lie().is_abelian() {
        Ok(model.clone())
    } else {
        maximal_torus(model)
    }
}

/// Evaluates the general-frame condition against precomputed data.
pub fn check_frame_against(data: &[SubtorusDatum], frame: &Frame) -> FrameReport {
    let mut constraints = 0;
    let mut min_part: Option<f64> = None;
    let mut verdict = FrameVerdict::General;
    for (j, d) in data.iter().enumerate() {
        let Some(g) = d.distinguished() else { continue };
        constraints += 1;
        let p = d.paired[g];
        let rotated: [f64; 3] = std::array::from_fn(|l| (0..3).map(|m| frame.entry(l, m) * p[m]).sum());
        let complex_part = C64::new(rotated[1], rotated[2]).norm();
        min_part = Some(min_part.map_or(complex_part, |m| m.min(complex_part)));
        let threshold = (COMPLEX_REL * norm3(&p)).max(COMPLEX_ABS);
        if complex_part <= threshold && verdict == FrameVerdict::General {
            verdict = FrameVerdict::NotGeneral { witness: j };
        }
    }
    FrameReport {
        verdict,
        constraints,
        min_complex_part: min_part,
        data: data.to_vec(),
    }
}

/// General-frame test; nonabelian models are first restricted to their
/// maximal torus.
pub fn check_general_frame(model: &ActionModel, frame: &Frame) -> Result<FrameReport> {
    let torus = reduced_torus(model)?;
    let data = enumerate_subtorus_data(&torus)?;
    Ok(check_frame_against(&data, frame))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledFrame {
    pub frame: Frame,
    pub attempts: usize,
}

/// Takes candidates until one passes the general-frame test.
pub fn sample_general_frame_from<I>(
    model: &ActionModel,
    candidates: I,
    max_attempts: usize,
) -> Result<SampledFrame>
where
    I: IntoIterator<Item = Frame>,
{
    let torus = reduced_torus(model)?;
    let data = enumerate_subtorus_data(&torus)?;
    for (k, frame) in candidates.into_iter().take(max_attempts).enumerate() {
        if check_frame_against(&data, &frame).is_general() {
            return Ok(SampledFrame { frame, attempts: k + 1 });
        }
        log::debug!("frame candidate {k} rejected");
    }
    Err(Error::DegenerateFrames { attempts: max_attempts })
}

/// Rejection-samples Haar-uniform frames from `seed`.
pub fn sample_general_frame(model: &ActionModel, seed: u64) -> Result<SampledFrame> {
    sample_general_frame_from(model, haar_frames(seed), DEFAULT_MAX_ATTEMPTS)
}
