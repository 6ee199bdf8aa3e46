//! Catalog of linear Hamiltonian hyperkähler actions and their moment maps.
//!
//! Every model acts complex-linearly on the `x` half of `T*C^N` through
//! skew-Hermitian matrices `L_a` and dually on the `y` half through
//! `conj(L_a)`. Moment maps are evaluated two ways:
//!
//! - by the catalog's closed matrix formulas ([`eval_moment`]), and
//! - by the quadratic forms `μ_l^a(z) = ½ g(X_a z, I_l z)` held in
//!   [`FramedModel`], which also provide exact differentials and Hessians.
//!
//! Central constants are subtracted: `μ = μ_closed − c`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{
    complex_pairing, real_pairing, unitary_basis, unitary_identity_pairing, LieAlgebra,
};
use crate::linalg::{block_diag, complex_to_real};
use crate::quaternionic::{rotate_moment, structure_matrices, Frame, HVec, State, Tangent, C64};

const REP_TOL: f64 = 1e-10;

/// A hyperkähler moment value: the real moment map `μ₁` and the complex moment
/// map `μ_C = μ₂ + √−1 μ₃`, both as coalgebra pairing vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub mu1: DVector<f64>,
    pub mu_c: DVector<C64>,
}

impl MomentValue {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mu1: DVector::zeros(dim),
            mu_c: DVector::from_element(dim, C64::new(0.0, 0.0)),
        }
    }

    pub fn triple(&self) -> [DVector<f64>; 3] {
        [
            self.mu1.clone(),
            self.mu_c.map(|c| c.re),
            self.mu_c.map(|c| c.im),
        ]
    }

    pub fn from_triple(t: [DVector<f64>; 3]) -> Self {
        let [m1, m2, m3] = t;
        let mu_c = m2.zip_map(&m3, C64::new);
        Self { mu1: m1, mu_c }
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    /// Euclidean norm of all coefficients.
    pub fn coefficient_norm(&self) -> f64 {
        (self.mu1.norm_squared() + self.mu_c.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Central constants given in a model descriptor. Full pairing vectors
/// (`c1`, `c_c`) may be combined with multiples of `√−1·Id` for the
/// `u(n)` families (`c1_scalar`, `c_c_scalar`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_c: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_scalar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_c_scalar: Option<[f64; 2]>,
}

/// Model descriptor, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// `U(1)` acting by `λ(x, y) = (λx, λ⁻¹y)` on `T*C^n`, with
    /// `μ_C = x·y − c` and `μ₁ = ½(|x|² − |y|²) − c1`.
    Circle {
        n: usize,
        #[serde(default)]
        c: [f64; 2],
        #[serde(default)]
        c1: f64,
    },
    /// Torus with weight matrix `weights[s][k]` (generator `s`, coordinate `k`).
    Torus {
        weights: Vec<Vec<i64>>,
        #[serde(default)]
        constants: Constants,
    },
    /// `U(n)` on `T*Hom(C^k, C^n)`.
    Hom {
        n: usize,
        k: usize,
        #[serde(default)]
        constants: Constants,
    },
    /// `U(n)` by conjugation on `T*End(C^n)`.
    End {
        n: usize,
        #[serde(default)]
        constants: Constants,
    },
    /// ADHM data: `U(n)` on `T*End(C^n) × T*Hom(C^k, C^n)`.
    Adhm {
        n: usize,
        k: usize,
        #[serde(default)]
        constants: Constants,
    },
    /// Product group acting on the product space.
    DirectSum {
        parts: Vec<ModelSpec>,
        #[serde(default)]
        constants: Constants,
    },
    /// One group acting diagonally; moment maps add.
    Diagonal {
        parts: Vec<ModelSpec>,
        #[serde(default)]
        constants: Constants,
    },
    /// Restriction along a Lie algebra homomorphism given as a real matrix
    /// (`dim k × dim h`, columns are images of the basis of `h`).
    Restriction {
        inner: Box<ModelSpec>,
        homomorphism: Vec<Vec<f64>>,
        #[serde(default)]
        constants: Constants,
    },
}

impl ModelSpec {
    pub fn circle(n: usize, c: C64) -> Self {
        Self::Circle {
            n,
            c: [c.re, c.im],
            c1: 0.0,
        }
    }

    pub fn circle_with_c1(n: usize, c: C64, c1: f64) -> Self {
        Self::Circle {
            n,
            c: [c.re, c.im],
            c1,
        }
    }

    pub fn torus(weights: Vec<Vec<i64>>) -> Self {
        Self::Torus {
            weights,
            constants: Constants::default(),
        }
    }

    pub fn end(n: usize) -> Self {
        Self::End {
            n,
            constants: Constants::default(),
        }
    }

    pub fn hom(n: usize, k: usize) -> Self {
        Self::Hom {
            n,
            k,
            constants: Constants::default(),
        }
    }

    pub fn adhm(n: usize, k: usize) -> Self {
        Self::Adhm {
            n,
            k,
            constants: Constants::default(),
        }
    }

    /// Replaces the descriptor's own constants (not available for circles,
    /// whose constants are explicit fields).
    pub fn with_constants(mut self, c: Constants) -> Self {
        match &mut self {
            Self::Circle { .. } => {}
            Self::Torus { constants, .. }
            | Self::Hom { constants, .. }
            | Self::End { constants, .. }
            | Self::Adhm { constants, .. }
            | Self::DirectSum { constants, .. }
            | Self::Diagonal { constants, .. }
            | Self::Restriction { constants, .. } => *constants = c,
        }
        self
    }

    pub fn build(&self) -> Result<ActionModel> {
        build_model(self)
    }
}

/// Structural tag retained on a built model; drives the closed-form
/// evaluators.
#[derive(Clone, Debug)]
pub enum ModelKind {
    Torus { weights: Vec<Vec<i64>> },
    Hom { n: usize, k: usize },
    End { n: usize },
    Adhm { n: usize, k: usize },
    DirectSum { parts: Vec<ModelKind>, sizes: Vec<usize>, dims: Vec<usize> },
    Diagonal { parts: Vec<ModelKind>, sizes: Vec<usize> },
    Restriction { inner: Box<ModelKind>, hom: DMatrix<f64> },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Torus { .. } => "torus-weights",
            Self::Hom { .. } => "u(n)-on-T*Hom(k,n)",
            Self::End { .. } => "u(n)-on-T*End(n)",
            Self::Adhm { .. } => "adhm(n,k)",
            Self::DirectSum { .. } => "direct-sum",
            Self::Diagonal { .. } => "diagonal",
            Self::Restriction { .. } => "restriction",
        }
    }
}

/// A linear Hamiltonian action with its moment map data. Immutable after
/// [`build_model`].
#[derive(Clone, Debug)]
pub struct ActionModel {
    lie: LieAlgebra,
    n: usize,
    kind: ModelKind,
    /// `2n × 2n` complex generators `R(e_a) = diag(L_a, conj L_a)`.
    rep: Vec<DMatrix<C64>>,
    rep_real: Vec<DMatrix<f64>>,
    c1: DVector<f64>,
    c_c: DVector<C64>,
    /// Rows `((l·dim + a)·4n + i)` hold the symmetric form `S_{l,a}` of the
    /// unshifted `μ_l^a(z) = ½ zᵀ S_{l,a} z`.
    forms: DMatrix<f64>,
}

impl ActionModel {
    pub fn lie(&self) -> &LieAlgebra {
        &self.lie
    }

    /// Quaternionic dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension `4n`.
    pub fn real_dim(&self) -> usize {
        4 * self.n
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn rep(&self) -> &[DMatrix<C64>] {
        &self.rep
    }

    pub fn rep_real(&self) -> &[DMatrix<f64>] {
        &self.rep_real
    }

    pub fn c1(&self) -> &DVector<f64> {
        &self.c1
    }

    pub fn c_c(&self) -> &DVector<C64> {
        &self.c_c
    }

    /// Central constants as a moment triple.
    pub fn constants(&self) -> MomentValue {
        MomentValue {
            mu1: self.c1.clone(),
            mu_c: self.c_c.clone(),
        }
    }

    pub fn has_zero_constants(&self) -> bool {
        self.c1.iter().all(|&v| v == 0.0) && self.c_c.iter().all(|v| v.norm_sqr() == 0.0)
    }

    fn check_state(&self, z: &State) -> Result<()> {
        if z.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: z.dim(),
            });
        }
        Ok(())
    }

    /// Complex generator `Σ ξ_a R(e_a)`.
    pub fn generator(&self, xi: &DVector<f64>) -> Result<DMatrix<C64>> {
        if xi.len() != self.lie.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lie.dim(),
                got: xi.len(),
            });
        }
        let mut m = DMatrix::zeros(2 * self.n, 2 * self.n);
        for (a, r) in self.rep.iter().enumerate() {
            m += r * C64::new(xi[a], 0.0);
        }
        Ok(m)
    }

    pub fn generator_real(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let d = self.real_dim();
        let mut m = DMatrix::zeros(d, d);
        for (a, r) in self.rep_real.iter().enumerate() {
            m += r * xi[a];
        }
        m
    }

    /// Group action `exp(Σ ξ_a R(e_a)) · z`.
    pub fn act(&self, xi: &DVector<f64>, z: &State) -> Result<State> {
        self.check_state(z)?;
        let g = self.generator(xi)?.exp();
        Ok(HVec::from_complex(&(g * z.to_complex())))
    }

    /// Coadjoint action `Ad*_{exp ξ}` on a moment value (pairing vectors).
    pub fn coadjoint(&self, xi: &DVector<f64>, m: &MomentValue) -> Result<MomentValue> {
        let ad = self.lie.ad_matrix(xi)?;
        let g = ad.exp();
        let lie = &self.lie;
        let map = |p: &DVector<f64>| lie.to_pairing(&(&g * lie.to_vector(p)));
        let t = m.triple();
        Ok(MomentValue::from_triple([map(&t[0]), map(&t[1]), map(&t[2])]))
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

/// Intermediate result of building a descriptor.
struct Built {
    lie: LieAlgebra,
    n: usize,
    kind: ModelKind,
    /// x-half generators `L_a` (`n × n`).
    gens: Vec<DMatrix<C64>>,
    c1: DVector<f64>,
    c_c: DVector<C64>,
    unitary_rank: Option<usize>,
}

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

fn hom_gens(n: usize, k: usize) -> Vec<DMatrix<C64>> {
    unitary_basis(n)
        .iter()
        .map(|xi| {
            let mut l = DMatrix::from_element(n * k, n * k, czero());
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..k {
                        l[(i * k + kk, j * k + kk)] += xi[(i, j)];
                    }
                }
            }
            l
        })
        .collect()
}

fn end_gens(n: usize) -> Vec<DMatrix<C64>> {
    unitary_basis(n)
        .iter()
        .map(|xi| {
            let mut l = DMatrix::from_element(n * n, n * n, czero());
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        l[(i * n + j, m * n + j)] += xi[(i, m)];
                        l[(i * n + j, i * n + m)] -= xi[(m, j)];
                    }
                }
            }
            l
        })
        .collect()
}

fn apply_constants(b: &mut Built, c: &Constants) -> Result<()> {
    let dim = b.lie.dim();
    if let Some(v) = &c.c1 {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        b.c1 += DVector::from_column_slice(v);
    }
    if let Some(v) = &c.c_c {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        b.c_c += DVector::from_iterator(dim, v.iter().map(|p| C64::new(p[0], p[1])));
    }
    if c.c1_scalar.is_some() || c.c_c_scalar.is_some() {
        let n = b
            .unitary_rank
            .ok_or_else(|| invalid("scalar constants require a u(n) model"))?;
        let id = unitary_identity_pairing(n);
        if let Some(s) = c.c1_scalar {
            b.c1 += &id * s;
        }
        if let Some([re, im]) = c.c_c_scalar {
            b.c_c += id.map(|v| C64::new(v * re, v * im));
        }
    }
    Ok(())
}

fn build_inner(spec: &ModelSpec) -> Result<Built> {
    match spec {
        ModelSpec::Circle { n, c, c1 } => {
            if *n == 0 {
                return Err(invalid("circle model needs n ≥ 1"));
            }
            let mut b = build_inner(&ModelSpec::torus(vec![vec![1; *n]]))?;
            // μ_C coefficient is −√−1 (x·y − c), so the stored constant is −√−1·c.
            b.c_c[0] = C64::new(0.0, -1.0) * C64::new(c[0], c[1]);
            b.c1[0] = *c1;
            Ok(b)
        }
        ModelSpec::Torus { weights, constants } => {
            let r = weights.len();
            if r == 0 {
                return Err(invalid("torus needs at least one generator"));
            }
            let n = weights[0].len();
            if n == 0 || weights.iter().any(|w| w.len() != n) {
                return Err(invalid("weight rows must be nonempty and of equal length"));
            }
            let gens = weights
                .iter()
                .map(|row| {
                    DMatrix::from_diagonal(&DVector::from_iterator(
                        n,
                        row.iter().map(|&w| C64::new(0.0, w as f64)),
                    ))
                })
                .collect();
            let mut b = Built {
                lie: LieAlgebra::abelian(r),
                n,
                kind: ModelKind::Torus { weights: weights.clone() },
                gens,
                c1: DVector::zeros(r),
                c_c: DVector::from_element(r, czero()),
                unitary_rank: None,
            };
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::Hom { n, k, constants } => {
            if *n == 0 || *k == 0 {
                return Err(invalid("Hom model needs n, k ≥ 1"));
            }
            let mut b = unitary_built(*n, n * k, ModelKind::Hom { n: *n, k: *k }, hom_gens(*n, *k));
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::End { n, constants } => {
            if *n == 0 {
                return Err(invalid("End model needs n ≥ 1"));
            }
            let mut b = unitary_built(*n, n * n, ModelKind::End { n: *n }, end_gens(*n));
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::Adhm { n, k, constants } => {
            if *n == 0 || *k == 0 {
                return Err(invalid("ADHM model needs n, k ≥ 1"));
            }
            let gens = end_gens(*n)
                .iter()
                .zip(hom_gens(*n, *k).iter())
                .map(|(e, h)| block_diag(&[e, h]))
                .collect();
            let mut b = unitary_built(*n, n * n + n * k, ModelKind::Adhm { n: *n, k: *k }, gens);
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::DirectSum { parts, constants } => {
            if parts.is_empty() {
                return Err(invalid("direct sum needs at least one part"));
            }
            let built: Vec<Built> = parts.iter().map(build_inner).collect::<Result<_>>()?;
            let mut acc = built[0].lie.clone();
            for p in &built[1..] {
                acc = LieAlgebra::direct_sum(&acc, &p.lie);
            }
            let n: usize = built.iter().map(|p| p.n).sum();
            let mut gens = Vec::new();
            let mut offset = 0;
            for p in &built {
                for g in &p.gens {
                    let mut big = DMatrix::from_element(n, n, czero());
                    big.view_mut((offset, offset), (p.n, p.n)).copy_from(g);
                    gens.push(big);
                }
                offset += p.n;
            }
            let c1 = DVector::from_iterator(acc.dim(), built.iter().flat_map(|p| p.c1.iter().copied()));
            let c_c =
                DVector::from_iterator(acc.dim(), built.iter().flat_map(|p| p.c_c.iter().copied()));
            let kind = ModelKind::DirectSum {
                sizes: built.iter().map(|p| p.n).collect(),
                dims: built.iter().map(|p| p.lie.dim()).collect(),
                parts: built.into_iter().map(|p| p.kind).collect(),
            };
            let mut b = Built {
                lie: acc,
                n,
                kind,
                gens,
                c1,
                c_c,
                unitary_rank: None,
            };
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::Diagonal { parts, constants } => {
            if parts.is_empty() {
                return Err(invalid("diagonal sum needs at least one part"));
            }
            let built: Vec<Built> = parts.iter().map(build_inner).collect::<Result<_>>()?;
            let lie = built[0].lie.clone();
            for p in &built[1..] {
                if !same_presentation(&lie, &p.lie) {
                    return Err(invalid("diagonal parts must share one Lie algebra presentation"));
                }
            }
            let n: usize = built.iter().map(|p| p.n).sum();
            let gens = (0..lie.dim())
                .map(|a| {
                    let blocks: Vec<&DMatrix<C64>> = built.iter().map(|p| &p.gens[a]).collect();
                    block_diag(&blocks)
                })
                .collect();
            let c1 = built.iter().fold(DVector::zeros(lie.dim()), |acc, p| acc + &p.c1);
            let c_c = built
                .iter()
                .fold(DVector::from_element(lie.dim(), czero()), |acc, p| acc + &p.c_c);
            let unitary_rank = built[0].unitary_rank;
            let kind = ModelKind::Diagonal {
                sizes: built.iter().map(|p| p.n).collect(),
                parts: built.into_iter().map(|p| p.kind).collect(),
            };
            let mut b = Built {
                lie,
                n,
                kind,
                gens,
                c1,
                c_c,
                unitary_rank,
            };
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
        ModelSpec::Restriction {
            inner,
            homomorphism,
            constants,
        } => {
            let inner = build_inner(inner)?;
            let dk = inner.lie.dim();
            if homomorphism.len() != dk {
                return Err(Error::DimensionMismatch {
                    expected: dk,
                    got: homomorphism.len(),
                });
            }
            let dh = homomorphism.first().map_or(0, |r| r.len());
            if dh == 0 || homomorphism.iter().any(|r| r.len() != dh) {
                return Err(invalid("homomorphism rows must be nonempty and of equal length"));
            }
            let hom = DMatrix::from_row_slice(dk, dh, &homomorphism.concat());
            let lie = pullback_algebra(&inner.lie, &hom)?;
            let gens = (0..dh)
                .map(|b| {
                    let mut g = DMatrix::from_element(inner.n, inner.n, czero());
                    for a in 0..dk {
                        g += &inner.gens[a] * C64::new(hom[(a, b)], 0.0);
                    }
                    g
                })
                .collect();
            let c1 = hom.transpose() * &inner.c1;
            let c_c = hom.map(|v| C64::new(v, 0.0)).transpose() * &inner.c_c;
            let mut b = Built {
                lie,
                n: inner.n,
                kind: ModelKind::Restriction {
                    inner: Box::new(inner.kind),
                    hom,
                },
                gens,
                c1,
                c_c,
                unitary_rank: None,
            };
            apply_constants(&mut b, constants)?;
            Ok(b)
        }
    }
}

fn unitary_built(rank: usize, n: usize, kind: ModelKind, gens: Vec<DMatrix<C64>>) -> Built {
    let lie = LieAlgebra::unitary(rank);
    let dim = lie.dim();
    Built {
        lie,
        n,
        kind,
        gens,
        c1: DVector::zeros(dim),
        c_c: DVector::from_element(dim, czero()),
        unitary_rank: Some(rank),
    }
}

fn same_presentation(a: &LieAlgebra, b: &LieAlgebra) -> bool {
    let d = a.dim();
    if d != b.dim() || (a.gram() - b.gram()).abs().max() > REP_TOL {
        return false;
    }
    (0..d).all(|i| {
        (0..d).all(|j| {
            (0..d).all(|k| (a.structure_constant(i, j, k) - b.structure_constant(i, j, k)).abs() <= REP_TOL)
        })
    })
}

/// Presentation of `h` induced by an injective homomorphism `D: h → k`:
/// brackets by least squares through `D`, inner product `Dᵀ G D`. The
/// homomorphism property is checked by the residual of that solve.
fn pullback_algebra(k: &LieAlgebra, hom: &DMatrix<f64>) -> Result<LieAlgebra> {
    let dh = hom.ncols();
    let (pinv, rank) = crate::linalg::pinv(hom, 1e-12);
    if rank < dh {
        return Err(invalid("homomorphism must be injective"));
    }
    let mut structure = vec![0.0; dh * dh * dh];
    for b in 0..dh {
        for c in 0..dh {
            let img = k.bracket(&hom.column(b).into_owned(), &hom.column(c).into_owned())?;
            let coeffs = &pinv * &img;
            let resid = (&img - hom * &coeffs).norm();
            if resid > 1e-9 * (1.0 + img.norm()) {
                return Err(invalid(format!(
                    "matrix is not a Lie algebra homomorphism (bracket residual {resid:e})"
                )));
            }
            for a in 0..dh {
                structure[a * dh * dh + b * dh + c] = coeffs[a];
            }
        }
    }
    let gram = hom.transpose() * k.gram() * hom;
    let labels = (0..dh).map(|b| format!("h{b}")).collect();
    LieAlgebra::new(labels, structure, gram)
}

/// Builds a model from its descriptor and validates it: generators are skew
/// for the metric, commute with `i` and `j` (hence preserve `ω_C`), form a
/// representation of the Lie algebra, and the constants are central.
pub fn build_model(spec: &ModelSpec) -> Result<ActionModel> {
    finish(build_inner(spec)?)
}

fn finish(b: Built) -> Result<ActionModel> {
    let n = b.n;
    let rep: Vec<DMatrix<C64>> = b
        .gens
        .iter()
        .map(|l| block_diag(&[l, &l.map(|c| c.conj())]))
        .collect();
    let rep_real: Vec<DMatrix<f64>> = rep.iter().map(complex_to_real).collect();
    let structures = structure_matrices(n);
    for (a, x) in rep_real.iter().enumerate() {
        let scale = 1.0 + x.abs().max();
        if (x + x.transpose()).abs().max() > REP_TOL * scale {
            return Err(invalid(format!("generator {a} is not skew")));
        }
        for s in &structures[..2] {
            if (x * s - s * x).abs().max() > REP_TOL * scale {
                return Err(invalid(format!("generator {a} does not commute with i, j")));
            }
        }
    }
    let dim = b.lie.dim();
    for p in 0..dim {
        for q in 0..dim {
            let comm = &rep_real[p] * &rep_real[q] - &rep_real[q] * &rep_real[p];
            let mut expect = DMatrix::zeros(4 * n, 4 * n);
            for (a, x) in rep_real.iter().enumerate() {
                expect += x * b.lie.structure_constant(a, p, q);
            }
            if (comm - expect).abs().max() > REP_TOL * (1.0 + rep_real[p].abs().max()).powi(2) {
                return Err(invalid("generators do not represent the Lie algebra"));
            }
        }
    }
    let scale = 1.0 + b.c1.abs().max() + b.c_c.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if b.lie.centrality_residual(&b.c1) > REP_TOL * scale
        || b.lie.complex_centrality_residual(&b.c_c) > REP_TOL * scale
    {
        return Err(invalid("central constants must lie in the center"));
    }
    if b.c1.iter().any(|v| !v.is_finite()) || b.c_c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(invalid("non-finite constants"));
    }
    let d = 4 * n;
    let mut forms = DMatrix::zeros(3 * dim * d, d);
    for (l, s) in structures.iter().enumerate() {
        for (a, x) in rep_real.iter().enumerate() {
            let m = x.transpose() * s;
            let sym = 0.5 * (&m + m.transpose());
            forms.view_mut(((l * dim + a) * d, 0), (d, d)).copy_from(&sym);
        }
    }
    Ok(ActionModel {
        lie: b.lie,
        n,
        kind: b.kind,
        rep,
        rep_real,
        c1: b.c1,
        c_c: b.c_c,
        forms,
    })
}

// ---------------------------------------------------------------------------
// Closed-form evaluation

fn hom_matrices(xs: &[C64], ys: &[C64], n: usize, k: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let x = DMatrix::from_fn(n, k, |i, kk| xs[i * k + kk]);
    let y = DMatrix::from_fn(k, n, |kk, i| ys[i * k + kk]);
    (x, y)
}

fn end_matrices(xs: &[C64], ys: &[C64], n: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let b1 = DMatrix::from_fn(n, n, |i, j| xs[i * n + j]);
    let b2 = DMatrix::from_fn(n, n, |j, i| ys[i * n + j]);
    (b1, b2)
}

fn comm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

fn unitary_pairings(n: usize, real_part: &DMatrix<C64>, complex_part: &DMatrix<C64>) -> (DVector<f64>, DVector<C64>) {
    let basis = unitary_basis(n);
    let p1 = DVector::from_iterator(basis.len(), basis.iter().map(|e| real_pairing(real_part, e)));
    let pc = DVector::from_iterator(basis.len(), basis.iter().map(|e| complex_pairing(complex_part, e)));
    (p1, pc)
}

fn closed_form(kind: &ModelKind, xs: &[C64], ys: &[C64]) -> (DVector<f64>, DVector<C64>) {
    let half_i = C64::new(0.0, 0.5);
    match kind {
        ModelKind::Torus { weights } => {
            let r = weights.len();
            let mut p1 = DVector::zeros(r);
            let mut pc = DVector::from_element(r, czero());
            for (s, row) in weights.iter().enumerate() {
                let mut hol = czero();
                for (k, &w) in row.iter().enumerate() {
                    p1[s] += 0.5 * w as f64 * (xs[k].norm_sqr() - ys[k].norm_sqr());
                    hol += xs[k] * ys[k] * w as f64;
                }
                // coefficient of the matrix Σ a x y against the generator √−1
                pc[s] = C64::new(0.0, -1.0) * hol;
            }
            (p1, pc)
        }
        ModelKind::Hom { n, k } => {
            let (x, y) = hom_matrices(xs, ys, *n, *k);
            let m1 = (&x * x.adjoint() - y.adjoint() * &y) * half_i;
            unitary_pairings(*n, &m1, &(&x * &y))
        }
        ModelKind::End { n } => {
            let (b1, b2) = end_matrices(xs, ys, *n);
            let m1 = (comm(&b1, &b1.adjoint()) + comm(&b2, &b2.adjoint())) * half_i;
            unitary_pairings(*n, &m1, &comm(&b1, &b2))
        }
        ModelKind::Adhm { n, k } => {
            let e = n * n;
            let (b1, b2) = end_matrices(&xs[..e], &ys[..e], *n);
            let (x, y) = hom_matrices(&xs[e..], &ys[e..], *n, *k);
            let m1 = (comm(&b1, &b1.adjoint()) + comm(&b2, &b2.adjoint()) + &x * x.adjoint()
                - y.adjoint() * &y)
                * half_i;
            let mc = comm(&b1, &b2) + &x * &y;
            unitary_pairings(*n, &m1, &mc)
        }
        ModelKind::DirectSum { parts, sizes, dims } => {
            let total: usize = dims.iter().sum();
            let mut p1 = DVector::zeros(total);
            let mut pc = DVector::from_element(total, czero());
            let (mut off, mut doff) = (0, 0);
            for ((part, &sz), &d) in parts.iter().zip(sizes).zip(dims) {
                let (q1, qc) = closed_form(part, &xs[off..off + sz], &ys[off..off + sz]);
                p1.rows_mut(doff, d).copy_from(&q1);
                pc.rows_mut(doff, d).copy_from(&qc);
                off += sz;
                doff += d;
            }
            (p1, pc)
        }
        ModelKind::Diagonal { parts, sizes } => {
            let mut off = 0;
            let mut acc: Option<(DVector<f64>, DVector<C64>)> = None;
            for (part, &sz) in parts.iter().zip(sizes) {
                let (q1, qc) = closed_form(part, &xs[off..off + sz], &ys[off..off + sz]);
                acc = Some(match acc {
                    None => (q1, qc),
                    Some((a1, ac)) => (a1 + q1, ac + qc),
                });
                off += sz;
            }
            acc.expect("nonempty diagonal")
        }
        ModelKind::Restriction { inner, hom } => {
            let (q1, qc) = closed_form(inner, xs, ys);
            let hc = hom.map(|v| C64::new(v, 0.0));
            (hom.transpose() * q1, hc.transpose() * qc)
        }
    }
}

/// Moment map at `z` in the frame `R`: catalog closed form, minus the central
/// constants, then rotated by the frame.
pub fn eval_moment(model: &ActionModel, frame: &Frame, z: &State) -> Result<MomentValue> {
    model.check_state(z)?;
    let (p1, pc) = closed_form(&model.kind, &z.x, &z.y);
    let reference = MomentValue {
        mu1: p1 - &model.c1,
        mu_c: pc - &model.c_c,
    };
    Ok(rotate_moment(frame, &reference))
}

/// The vector field `ξ_z = (Σ ξ_a R(e_a)) z`.
pub fn infinitesimal_action(model: &ActionModel, xi: &DVector<f64>, z: &State) -> Result<Tangent> {
    model.check_state(z)?;
    let g = model.generator(xi)?;
    Ok(HVec::from_complex(&(g * z.to_complex())))
}

/// Differential of the moment map at a point: a real `3·dim × 4n` matrix whose
/// row `l·dim + a` is `dμ_l^a`.
#[derive(Clone, Debug)]
pub struct MomentJacobian {
    pub dim: usize,
    pub matrix: DMatrix<f64>,
}

impl MomentJacobian {
    pub fn apply(&self, v: &Tangent) -> MomentValue {
        let out = &self.matrix * v.to_real();
        let d = self.dim;
        MomentValue::from_triple([
            out.rows(0, d).into_owned(),
            out.rows(d, d).into_owned(),
            out.rows(2 * d, d).into_owned(),
        ])
    }

    /// Rows of `dμ_C` only (`μ₂` then `μ₃`), as a real `2·dim × 4n` matrix.
    pub fn complex_rows(&self) -> DMatrix<f64> {
        self.matrix.rows(self.dim, 2 * self.dim).into_owned()
    }
}

pub fn moment_jacobian(model: &ActionModel, frame: &Frame, z: &State) -> Result<MomentJacobian> {
    model.check_state(z)?;
    let fm = FramedModel::new(model, *frame);
    let w = fm.form_images(&z.to_real());
    Ok(MomentJacobian {
        dim: model.lie.dim(),
        matrix: w.transpose(),
    })
}

pub fn bracket(model: &ActionModel, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    model.lie.bracket(a, b)
}

pub fn ad_matrix(model: &ActionModel, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    model.lie.ad_matrix(beta)
}

/// A model together with a hyperkähler frame, with the rotated quadratic forms
/// precomputed. All evaluators take real coordinates.
#[derive(Clone, Debug)]
pub struct FramedModel<'a> {
    model: &'a ActionModel,
    frame: Frame,
    forms: DMatrix<f64>,
    consts: [DVector<f64>; 3],
}

/// Moment pairings together with the images `S'_{l,a} z` of the point under
/// every rotated form.
#[derive(Clone, Debug)]
pub struct PointData {
    /// Columns `l·dim + a` hold `S'_{l,a} z`.
    pub images: DMatrix<f64>,
    pub pairings: [DVector<f64>; 3],
}

impl<'a> FramedModel<'a> {
    pub fn new(model: &'a ActionModel, frame: Frame) -> Self {
        let dim = model.lie.dim();
        let d = model.real_dim();
        let mut forms = DMatrix::zeros(3 * dim * d, d);
        for l in 0..3 {
            for m in 0..3 {
                let r = frame.entry(l, m);
                if r == 0.0 {
                    continue;
                }
                let src = model.forms.rows(m * dim * d, dim * d);
                let mut dst = forms.rows_mut(l * dim * d, dim * d);
                dst += src * r;
            }
        }
        let base = model.constants().triple();
        let consts = std::array::from_fn(|l| {
            let mut out = DVector::zeros(dim);
            for (m, b) in base.iter().enumerate() {
                out += b * frame.entry(l, m);
            }
            out
        });
        Self {
            model,
            frame,
            forms,
            consts,
        }
    }

    pub fn model(&self) -> &ActionModel {
        self.model
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.model.lie.dim()
    }

    pub fn real_dim(&self) -> usize {
        self.model.real_dim()
    }

    /// The rotated form `S'_{l,a}`.
    pub fn form(&self, l: usize, a: usize) -> DMatrix<f64> {
        let d = self.real_dim();
        self.forms.rows((l * self.dim() + a) * d, d).into_owned()
    }

    /// `Σ_a v_a S'_{l,a}`.
    pub fn form_combination(&self, l: usize, v: &DVector<f64>) -> DMatrix<f64> {
        let d = self.real_dim();
        let mut out = DMatrix::zeros(d, d);
        for a in 0..self.dim() {
            if v[a] != 0.0 {
                out += self.forms.rows((l * self.dim() + a) * d, d) * v[a];
            }
        }
        out
    }

    /// `d × 3·dim` matrix with columns `S'_{l,a} z`.
    pub fn form_images(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let d = self.real_dim();
        let flat = &self.forms * z;
        DMatrix::from_column_slice(d, 3 * self.dim(), flat.as_slice())
    }

    pub fn point_data(&self, z: &DVector<f64>) -> PointData {
        let images = self.form_images(z);
        let dim = self.dim();
        let proj = images.transpose() * z * 0.5;
        let pairings = std::array::from_fn(|l| proj.rows(l * dim, dim).into_owned() - &self.consts[l]);
        PointData { images, pairings }
    }

    /// Moment value from the quadratic forms (independent of the closed forms).
    pub fn moment(&self, z: &DVector<f64>) -> MomentValue {
        MomentValue::from_triple(self.point_data(z).pairings)
    }

    /// Algebra vectors `β_l = G⁻¹ μ_l(z)`.
    pub fn betas(&self, pd: &PointData) -> [DVector<f64>; 3] {
        std::array::from_fn(|l| self.model.lie.to_vector(&pd.pairings[l]))
    }

    /// `f₂₃ = ‖μ₂‖² + ‖μ₃‖²`.
    pub fn f23(&self, z: &DVector<f64>) -> f64 {
        let pd = self.point_data(z);
        self.f23_from(&pd)
    }

    pub fn f23_from(&self, pd: &PointData) -> f64 {
        let lie = &self.model.lie;
        lie.coalgebra_norm_sqr(&pd.pairings[1]) + lie.coalgebra_norm_sqr(&pd.pairings[2])
    }

    /// `‖μ₁‖²`.
    pub fn mu1_sq(&self, z: &DVector<f64>) -> f64 {
        let pd = self.point_data(z);
        self.model.lie.coalgebra_norm_sqr(&pd.pairings[0])
    }

    fn block(&self, pd: &PointData, l: usize) -> DMatrix<f64> {
        let dim = self.dim();
        pd.images.columns(l * dim, dim).into_owned()
    }

    /// Euclidean gradient of `‖μ_l‖²`: `2 Σ_a β_l^a S'_{l,a} z`.
    pub fn grad_component_sq(&self, pd: &PointData, l: usize) -> DVector<f64> {
        let beta = self.model.lie.to_vector(&pd.pairings[l]);
        self.block(pd, l) * beta * 2.0
    }

    pub fn grad_f23(&self, z: &DVector<f64>) -> DVector<f64> {
        let pd = self.point_data(z);
        self.grad_component_sq(&pd, 1) + self.grad_component_sq(&pd, 2)
    }

    pub fn grad_mu1_sq(&self, z: &DVector<f64>) -> DVector<f64> {
        let pd = self.point_data(z);
        self.grad_component_sq(&pd, 0)
    }

    /// Exact Hessian of `‖μ_l‖²` summed over the given components.
    pub fn hessian_components_sq(&self, z: &DVector<f64>, comps: &[usize]) -> DMatrix<f64> {
        let pd = self.point_data(z);
        let d = self.real_dim();
        let gi = self.model.lie.gram_inv();
        let mut h = DMatrix::zeros(d, d);
        for &l in comps {
            let w = self.block(&pd, l);
            h += &w * gi * w.transpose() * 2.0;
            let beta = self.model.lie.to_vector(&pd.pairings[l]);
            h += self.form_combination(l, &beta) * 2.0;
        }
        0.5 * (&h + h.transpose())
    }

    /// Real Jacobian of `μ_C` (rows `μ₂` then `μ₃`) at `z`.
    pub fn complex_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        self.form_images(z).columns(dim, 2 * dim).transpose()
    }

    /// Real Jacobian of `μ₁` at `z`.
    pub fn real_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        self.form_images(z).columns(0, dim).transpose()
    }

    /// `‖μ_C(z)‖` in the coalgebra norm.
    pub fn mu_c_norm(&self, z: &DVector<f64>) -> f64 {
        self.f23(z).sqrt()
    }
}

/// Weights of a torus model whose generators act diagonally on coordinates.
pub fn torus_weights(model: &ActionModel) -> Result<Vec<Vec<i64>>> {
    if !model.lie.is_abelian() {
        return Err(Error::Unsupported("weights are defined for torus models only".into()));
    }
    let n = model.n;
    let mut out = Vec::with_capacity(model.lie.dim());
    for r in &model.rep {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            for m in 0..n {
                if m != k && r[(k, m)].norm() > REP_TOL {
                    return Err(Error::Unsupported("torus does not act diagonally on coordinates".into()));
                }
            }
            let w = r[(k, k)];
            let rounded = w.im.round();
            if w.re.abs() > REP_TOL || (w.im - rounded).abs() > 1e-9 {
                return Err(Error::Unsupported("non-integral torus weight".into()));
            }
            row.push(rounded as i64);
        }
        out.push(row);
    }
    Ok(out)
}

/// Restriction of a built model along an injective Lie algebra homomorphism
/// `hom` (`dim k × dim h`). Constants are pulled back.
pub fn restrict(model: &ActionModel, hom: &DMatrix<f64>) -> Result<ActionModel> {
    let dk = model.lie.dim();
    if hom.nrows() != dk || hom.ncols() == 0 {
        return Err(Error::DimensionMismatch { expected: dk, got: hom.nrows() });
    }
    let lie = pullback_algebra(&model.lie, hom)?;
    let n = model.n;
    let gens = (0..hom.ncols())
        .map(|b| {
            let mut g = DMatrix::from_element(n, n, czero());
            for a in 0..dk {
                g += model.rep[a].view((0, 0), (n, n)) * C64::new(hom[(a, b)], 0.0);
            }
            g
        })
        .collect();
    let hc = hom.map(|v| C64::new(v, 0.0));
    finish(Built {
        lie,
        n,
        kind: ModelKind::Restriction {
            inner: Box::new(model.kind.clone()),
            hom: hom.clone(),
        },
        gens,
        c1: hom.transpose() * &model.c1,
        c_c: hc.transpose() * &model.c_c,
        unitary_rank: None,
    })
}

/// Restriction to the maximal torus: the model itself for torus actions, the
/// diagonal Cartan subalgebra for the `u(n)` families.
pub fn maximal_torus(model: &ActionModel) -> Result<ActionModel> {
    if model.lie.is_abelian() {
        return Ok(model.clone());
    }
    let rank = unitary_rank(&model.kind).ok_or_else(|| {
        Error::Unsupported(format!("maximal torus of a {} model", model.kind.name()))
    })?;
    let hom = DMatrix::from_fn(model.lie.dim(), rank, |a, s| if a == s { 1.0 } else { 0.0 });
    restrict(model, &hom)
}

fn unitary_rank(kind: &ModelKind) -> Option<usize> {
    match kind {
        ModelKind::Hom { n, .. } | ModelKind::End { n } | ModelKind::Adhm { n, .. } => Some(*n),
        ModelKind::Diagonal { parts, .. } => parts.first().and_then(unitary_rank),
        _ => None,
    }
}

/// True for torus models with a single generator and all weights equal to 1
/// (the circle family).
pub fn is_unit_circle(model: &ActionModel) -> bool {
    matches!(torus_weights(model), Ok(w) if w.len() == 1 && w[0].iter().all(|&a| a == 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn circle_complex_moment_is_xy_minus_c() {
        let m = ModelSpec::circle(1, c(1.0, 0.0)).build().unwrap();
        let z = HVec::from_reals(&[1.0], &[1.0]).unwrap();
        let mv = eval_moment(&m, &Frame::identity(), &z).unwrap();
        assert!(mv.mu_c[0].norm() < 1e-15);
        // √−1·μ_C recovers the matrix form x·y − c
        let z = HVec::new(vec![c(0.5, 2.0)], vec![c(-1.0, 0.25)]).unwrap();
        let mv = eval_moment(&m, &Frame::identity(), &z).unwrap();
        let matrix_form = z.x[0] * z.y[0] - c(1.0, 0.0);
        assert!((mv.mu_c[0] * c(0.0, 1.0) - matrix_form).norm() < 1e-14);
    }

    #[test]
    fn circle_two_example() {
        let m = ModelSpec::circle(2, c(0.0, 0.0)).build().unwrap();
        let z = HVec::from_reals(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let mv = eval_moment(&m, &Frame::identity(), &z).unwrap();
        assert_eq!(mv.mu_c[0], c(0.0, 0.0));
        assert_eq!(mv.mu1[0], 0.0);
    }

    #[test]
    fn end_complex_moment_is_commutator() {
        let m = ModelSpec::end(2).build().unwrap();
        let z = HVec::new(
            vec![c(1.0, 0.5), c(-0.3, 0.0), c(0.2, 1.0), c(0.0, -0.7)],
            vec![c(0.4, 0.1), c(1.1, -0.2), c(-0.5, 0.3), c(0.9, 0.0)],
        )
        .unwrap();
        let mv = eval_moment(&m, &Frame::identity(), &z).unwrap();
        let (b1, b2) = end_matrices(&z.x, &z.y, 2);
        let commutator = comm(&b1, &b2);
        // coefficients c_a = −tr(A e_a) against an orthonormal basis give A = Σ c_a e_a
        let basis = unitary_basis(2);
        let mut rebuilt = DMatrix::from_element(2, 2, czero());
        for (a, e) in basis.iter().enumerate() {
            rebuilt += e * mv.mu_c[a];
        }
        assert!((rebuilt - commutator).norm() < 1e-13);
    }

    #[test]
    fn direct_sum_evaluates_blockwise() {
        let s1 = ModelSpec::circle(1, c(1.0, 0.0));
        let s2 = ModelSpec::circle(2, c(0.0, 2.0));
        let sum = ModelSpec::DirectSum {
            parts: vec![s1.clone(), s2.clone()],
            constants: Constants::default(),
        }
        .build()
        .unwrap();
        let z1 = HVec::new(vec![c(0.3, 0.2)], vec![c(1.0, -1.0)]).unwrap();
        let z2 = HVec::new(vec![c(0.1, 0.0), c(2.0, 1.0)], vec![c(0.5, 0.5), c(-1.0, 0.0)]).unwrap();
        let z = HVec::new(
            [z1.x.clone(), z2.x.clone()].concat(),
            [z1.y.clone(), z2.y.clone()].concat(),
        )
        .unwrap();
        let f = Frame::identity();
        let both = eval_moment(&sum, &f, &z).unwrap();
        let m1 = eval_moment(&s1.build().unwrap(), &f, &z1).unwrap();
        let m2 = eval_moment(&s2.build().unwrap(), &f, &z2).unwrap();
        assert!((both.mu1[0] - m1.mu1[0]).abs() < 1e-15);
        assert!((both.mu1[1] - m2.mu1[0]).abs() < 1e-15);
        assert!((both.mu_c[0] - m1.mu_c[0]).norm() < 1e-15);
        assert!((both.mu_c[1] - m2.mu_c[0]).norm() < 1e-15);
    }

    #[test]
    fn diagonal_sums_moment_maps() {
        let s1 = ModelSpec::circle(1, c(0.0, 0.0));
        let s2 = ModelSpec::circle(1, c(0.0, 0.0));
        let diag = ModelSpec::Diagonal {
            parts: vec![s1, s2],
            constants: Constants::default(),
        }
        .build()
        .unwrap();
        let circle2 = ModelSpec::circle(2, c(0.0, 0.0)).build().unwrap();
        let z = HVec::new(vec![c(0.3, 0.2), c(1.0, 0.1)], vec![c(1.0, -1.0), c(0.0, 2.0)]).unwrap();
        let f = Frame::identity();
        let a = eval_moment(&diag, &f, &z).unwrap();
        let b = eval_moment(&circle2, &f, &z).unwrap();
        assert!((a.coefficient_norm() - b.coefficient_norm()).abs() < 1e-14);
        assert!((a.mu_c[0] - b.mu_c[0]).norm() < 1e-14);
    }

    #[test]
    fn zero_state_gives_zero_moment() {
        let f = Frame::identity();
        for spec in [ModelSpec::end(2), ModelSpec::adhm(2, 1), ModelSpec::hom(2, 3)] {
            let m = spec.build().unwrap();
            let mv = eval_moment(&m, &f, &HVec::zeros(m.n())).unwrap();
            assert_eq!(mv.coefficient_norm(), 0.0);
        }
    }

    #[test]
    fn unknown_and_inconsistent_descriptors() {
        let err = serde_json::from_str::<ModelSpec>(r#"{"kind":"coadjoint-orbit","n":2}"#);
        assert!(err.is_err());
        let ragged = ModelSpec::torus(vec![vec![1, 0], vec![1]]);
        assert!(matches!(ragged.build(), Err(Error::InvalidModel(_))));
        let m = ModelSpec::circle(2, c(0.0, 0.0)).build().unwrap();
        assert!(matches!(
            eval_moment(&m, &Frame::identity(), &HVec::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_central_constants_rejected() {
        let mut c1 = vec![0.0; 4];
        c1[2] = 1.0;
        let spec = ModelSpec::end(2).with_constants(Constants {
            c1: Some(c1),
            ..Default::default()
        });
        assert!(matches!(spec.build(), Err(Error::InvalidModel(_))));
        let ok = ModelSpec::end(2).with_constants(Constants {
            c1_scalar: Some(0.5),
            c_c_scalar: Some([1.0, 0.0]),
            ..Default::default()
        });
        assert!(ok.build().is_ok());
    }

    #[test]
    fn restriction_must_be_homomorphism() {
        // Two off-diagonal generators of u(2) do not span a subalgebra.
        let hom = (0..4)
            .map(|a| vec![if a == 2 { 1.0 } else { 0.0 }, if a == 3 { 1.0 } else { 0.0 }])
            .collect();
        let spec = ModelSpec::Restriction {
            inner: Box::new(ModelSpec::end(2)),
            homomorphism: hom,
            constants: Constants::default(),
        };
        assert!(matches!(spec.build(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn infinitesimal_action_examples() {
        let m = ModelSpec::circle(1, c(0.0, 0.0)).build().unwrap();
        let z = HVec::from_reals(&[1.0], &[1.0]).unwrap();
        let v = infinitesimal_action(&m, &DVector::from_vec(vec![1.0]), &z).unwrap();
        assert_eq!(v.x[0], c(0.0, 1.0));
        assert_eq!(v.y[0], c(0.0, -1.0));
        let zero = infinitesimal_action(&m, &DVector::from_vec(vec![0.0]), &z).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let fixed = infinitesimal_action(&m, &DVector::from_vec(vec![2.5]), &HVec::zeros(1)).unwrap();
        assert_eq!(fixed.norm(), 0.0);
    }

    #[test]
    fn jacobian_of_circle_complex_moment() {
        let m = ModelSpec::circle(1, c(0.0, 0.0)).build().unwrap();
        let z = HVec::from_reals(&[1.0], &[1.0]).unwrap();
        let jac = moment_jacobian(&m, &Frame::identity(), &z).unwrap();
        let v = HVec::from_reals(&[1.0], &[0.0]).unwrap();
        let dm = jac.apply(&v);
        // d(x·y)(δx) = δx·y = 1 in matrix form
        assert!((dm.mu_c[0] * c(0.0, 1.0) - c(1.0, 0.0)).norm() < 1e-15);
        let at_zero = moment_jacobian(&m, &Frame::identity(), &HVec::zeros(1)).unwrap();
        assert_eq!(at_zero.matrix.norm(), 0.0);
    }

    #[test]
    fn weights_of_maximal_torus() {
        let t = maximal_torus(&ModelSpec::end(2).build().unwrap()).unwrap();
        let w = torus_weights(&t).unwrap();
        // B_ij scales by t_i / t_j
        assert_eq!(w, vec![vec![0, 1, -1, 0], vec![0, -1, 1, 0]]);
    }
}
