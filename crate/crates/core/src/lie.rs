//! Lie algebra presentations: structure constants plus an invariant inner
//! product, used to identify the algebra with its dual.
//!
//! Coalgebra elements are stored as *pairing vectors* `p_a = ⟨μ, e_a⟩`; the
//! corresponding algebra vector is `G⁻¹ p` where `G` is the Gram matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternionic::C64;

const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LieAlgebra {
    dim: usize,
    labels: Vec<String>,
    /// `c^a_{bc}` stored at `a·dim² + b·dim + c`.
    structure: Vec<f64>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl LieAlgebra {
    /// Builds and validates a presentation: antisymmetry, Jacobi, a symmetric
    /// positive definite Gram matrix and ad-invariance, all within 1e-10.
    pub fn new(labels: Vec<String>, structure: Vec<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let dim = labels.len();
        if structure.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: structure.len(),
            });
        }
        if gram.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gram.nrows(),
            });
        }
        let gram_inv = if dim == 0 {
            DMatrix::zeros(0, 0)
        } else {
            gram.clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidModel("inner product is not positive definite".into()))?
                .inverse()
        };
        let lie = Self {
            dim,
            labels,
            structure,
            gram,
            gram_inv,
        };
        lie.validate()?;
        Ok(lie)
    }

    /// Abelian algebra `R^r` with the standard inner product.
    pub fn abelian(rank: usize) -> Self {
        Self {
            dim: rank,
            labels: (0..rank).map(|s| format!("t{s}")).collect(),
            structure: vec![0.0; rank * rank * rank],
            gram: DMatrix::identity(rank, rank),
            gram_inv: DMatrix::identity(rank, rank),
        }
    }

    /// `u(n)` in the orthonormal skew-Hermitian basis of [`unitary_basis`],
    /// with `⟨a, b⟩ = −Re tr(ab)`.
    pub fn unitary(n: usize) -> Self {
        let basis = unitary_basis(n);
        let dim = basis.len();
        let mut structure = vec![0.0; dim * dim * dim];
        for b in 0..dim {
            for c in 0..dim {
                let comm = &basis[b] * &basis[c] - &basis[c] * &basis[b];
                for a in 0..dim {
                    structure[a * dim * dim + b * dim + c] = real_pairing(&comm, &basis[a]);
                }
            }
        }
        Self {
            dim,
            labels: unitary_labels(n),
            structure,
            gram: DMatrix::identity(dim, dim),
            gram_inv: DMatrix::identity(dim, dim),
        }
    }

    /// Direct sum `k₁ ⊕ k₂` (product group).
    pub fn direct_sum(a: &Self, b: &Self) -> Self {
        let dim = a.dim + b.dim;
        let mut structure = vec![0.0; dim * dim * dim];
        for (src, off) in [(a, 0usize), (b, a.dim)] {
            let d = src.dim;
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        structure[(i + off) * dim * dim + (j + off) * dim + (k + off)] =
                            src.structure[i * d * d + j * d + k];
                    }
                }
            }
        }
        let gram = crate::linalg::block_diag(&[&a.gram, &b.gram]);
        let gram_inv = crate::linalg::block_diag(&[&a.gram_inv, &b.gram_inv]);
        let labels = a
            .labels
            .iter()
            .map(|l| format!("{l}'1"))
            .chain(b.labels.iter().map(|l| format!("{l}'2")))
            .collect();
        Self {
            dim,
            labels,
            structure,
            gram,
            gram_inv,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// Structure constant `c^a_{bc}`.
    pub fn structure_constant(&self, a: usize, b: usize, c: usize) -> f64 {
        self.structure[a * self.dim * self.dim + b * self.dim + c]
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|&c| c == 0.0)
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `[a, b]` by structure-constant contraction.
    pub fn bracket(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(a)?;
        self.check_len(b)?;
        Ok(self.ad_matrix(a)? * b)
    }

    /// Matrix of `ad β` acting on column vectors: `ad_matrix(β)·a = [β, a]`.
    pub fn ad_matrix(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(beta)?;
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for c in 0..d {
            for a in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    s += beta[b] * self.structure[c * d * d + b * d + a];
                }
                m[(c, a)] = s;
            }
        }
        Ok(m)
    }

    /// Algebra vector `G⁻¹ p` of a pairing vector.
    pub fn to_vector(&self, pairing: &DVector<f64>) -> DVector<f64> {
        &self.gram_inv * pairing
    }

    pub fn to_pairing(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gram * v
    }

    /// `‖p‖² = pᵀ G⁻¹ p` for a pairing vector.
    pub fn coalgebra_norm_sqr(&self, pairing: &DVector<f64>) -> f64 {
        pairing.dot(&(&self.gram_inv * pairing))
    }

    /// Largest `|Σ_a p_a c^a_{bd}|`: zero exactly when the pairing vector is
    /// ad*-invariant (central).
    pub fn centrality_residual(&self, pairing: &DVector<f64>) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for b in 0..d {
            for c in 0..d {
                let s: f64 = (0..d)
                    .map(|a| pairing[a] * self.structure[a * d * d + b * d + c])
                    .sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }

    pub fn complex_centrality_residual(&self, pairing: &DVector<C64>) -> f64 {
        let re = pairing.map(|c| c.re);
        let im = pairing.map(|c| c.im);
        self.centrality_residual(&re).max(self.centrality_residual(&im))
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim;
        let c = |a: usize, b: usize, e: usize| self.structure[a * d * d + b * d + e];
        let scale = 1.0 + self.structure.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..d {
            for b in 0..d {
                for e in 0..d {
                    if (c(a, b, e) + c(a, e, b)).abs() > STRUCTURE_TOL * scale {
                        return Err(Error::InvalidModel(format!(
                            "structure constants not antisymmetric at ({a},{b},{e})"
                        )));
                    }
                }
            }
        }
        // Jacobi: [x,[y,z]] + [y,[z,x]] + [z,[x,y]] = 0 on basis triples.
        for x in 0..d {
            for y in 0..d {
                for z in 0..d {
                    for out in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += c(out, x, m) * c(m, y, z)
                                + c(out, y, m) * c(m, z, x)
                                + c(out, z, m) * c(m, x, y);
                        }
                        if s.abs() > STRUCTURE_TOL * scale * scale {
                            return Err(Error::InvalidModel("Jacobi identity fails".into()));
                        }
                    }
                }
            }
        }
        let asym = (&self.gram - self.gram.transpose()).abs().max();
        if asym > STRUCTURE_TOL {
            return Err(Error::InvalidModel("inner product not symmetric".into()));
        }
        // ⟨[a,b],c⟩ + ⟨b,[a,c]⟩ = 0
        for a in 0..d {
            let mut ea = DVector::zeros(d);
            ea[a] = 1.0;
            let ad = self.ad_matrix(&ea)?;
            let inv = ad.transpose() * &self.gram + &self.gram * &ad;
            if inv.abs().max() > STRUCTURE_TOL * scale * (1.0 + self.gram.abs().max()) {
                return Err(Error::InvalidModel("inner product not ad-invariant".into()));
            }
        }
        Ok(())
    }
}

/// `−Re tr(ab)`.
pub fn real_pairing(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    -(a * b).trace().re
}

/// Complex coefficient of a `gl(n)` element against a basis element of
/// `u(n)`: `−tr(A e)`.
pub fn complex_pairing(a: &DMatrix<C64>, e: &DMatrix<C64>) -> C64 {
    -(a * e).trace()
}

/// Orthonormal skew-Hermitian basis of `u(n)`: first `√−1 E_aa`, then for each
/// `a < b` the pair `(E_ab − E_ba)/√2`, `√−1 (E_ab + E_ba)/√2`.
pub fn unitary_basis(n: usize) -> Vec<DMatrix<C64>> {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        let mut m = DMatrix::zeros(n, n);
        m[(a, a)] = i;
        out.push(m);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let mut re = DMatrix::zeros(n, n);
            re[(a, b)] = one * s;
            re[(b, a)] = -one * s;
            out.push(re);
            let mut im = DMatrix::zeros(n, n);
            im[(a, b)] = i * s;
            im[(b, a)] = i * s;
            out.push(im);
        }
    }
    out
}

fn unitary_labels(n: usize) -> Vec<String> {
    let mut out: Vec<String> = (0..n).map(|a| format!("iE{a}{a}")).collect();
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(format!("R{a}{b}"));
            out.push(format!("I{a}{b}"));
        }
    }
    out
}

/// Pairing vector of the central element `√−1·Id` of `u(n)` in the basis of
/// [`unitary_basis`].
pub fn unitary_identity_pairing(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n * n);
    for a in 0..n {
        v[a] = 1.0;
    }
    v
}

/// Matrix `Σ_a v_a e_a` of an algebra vector of `u(n)`.
pub fn unitary_matrix(n: usize, v: &DVector<f64>) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(n, n);
    for (a, e) in unitary_basis(n).iter().enumerate() {
        m += e * C64::new(v[a], 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a * b - b * a
    }

    #[test]
    fn torus_bracket_vanishes() {
        let t = LieAlgebra::abelian(3);
        let a = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = DVector::from_vec(vec![0.3, 0.1, 4.0]);
        assert_eq!(t.bracket(&a, &b).unwrap().norm(), 0.0);
    }

    #[test]
    fn unitary_basis_is_orthonormal() {
        for n in 1..=3 {
            let basis = unitary_basis(n);
            for (a, ea) in basis.iter().enumerate() {
                assert!((&ea.adjoint() + ea).norm() < 1e-15);
                for (b, eb) in basis.iter().enumerate() {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((real_pairing(ea, eb) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn u2_bracket_matches_matrix_commutator() {
        let u2 = LieAlgebra::unitary(2);
        let a = DVector::from_vec(vec![0.3, -1.1, 0.7, 2.0]);
        let b = DVector::from_vec(vec![-0.4, 0.9, 1.5, -0.2]);
        let via_constants = unitary_matrix(2, &u2.bracket(&a, &b).unwrap());
        let via_matrices = commutator(&unitary_matrix(2, &a), &unitary_matrix(2, &b));
        assert!((via_constants - via_matrices).norm() < 1e-13);
    }

    #[test]
    fn ad_of_self_vanishes() {
        let u3 = LieAlgebra::unitary(3);
        let beta = DVector::from_fn(9, |i, _| (i as f64 * 0.37).sin());
        assert!((u3.ad_matrix(&beta).unwrap() * &beta).norm() < 1e-13);
    }

    #[test]
    fn unitary_presentation_validates() {
        for n in 1..=3 {
            let u = LieAlgebra::unitary(n);
            let rebuilt = LieAlgebra::new(u.labels.clone(), u.structure.clone(), u.gram.clone());
            assert!(rebuilt.is_ok(), "u({n}) failed validation");
        }
    }

    #[test]
    fn broken_presentations_rejected() {
        let mut bad = vec![0.0; 8];
        bad[0 * 4 + 0 * 2 + 1] = 1.0; // c^0_{01} without its antisymmetric partner
        let err = LieAlgebra::new(vec!["a".into(), "b".into()], bad, DMatrix::identity(2, 2));
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = LieAlgebra::new(vec!["a".into(), "b".into()], vec![0.0; 8], gram);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn identity_is_central_in_u3() {
        let u3 = LieAlgebra::unitary(3);
        assert!(u3.centrality_residual(&unitary_identity_pairing(3)) < 1e-14);
        let mut off = DVector::zeros(9);
        off[3] = 1.0;
        assert!(u3.centrality_residual(&off) > 0.1);
    }

    #[test]
    fn bracket_shape_mismatch() {
        let u2 = LieAlgebra::unitary(2);
        let a = DVector::zeros(3);
        assert!(matches!(
            u2.bracket(&a, &a),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
