//! Points and tangent vectors of `H^n = T*C^n`, the hyperkähler structures and
//! SO(3) frames.
//!
//! A point is a pair `(x, y)` of complex `n`-vectors. Real coordinates are
//! interleaved: complex coordinate `k` of `x` occupies real slots `2k, 2k+1`,
//! and complex coordinate `k` of `y` occupies `2n+2k, 2n+2k+1`.
//!
//! The complex structures are `i(x, y) = (√−1·x, √−1·y)`,
//! `j(x, y) = (−ȳ, x̄)` and `k = i∘j`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::MomentValue;

pub type C64 = Complex<f64>;

const UNIT_TOL: f64 = 1e-12;

/// A vector of `C^{2n} ≅ H^n`, used both for points and tangent vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HVec {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

pub type State = HVec;
pub type Tangent = HVec;

impl HVec {
    pub fn new(x: Vec<C64>, y: Vec<C64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        Ok(Self { x, y })
    }

    /// Convenience constructor from real parts only.
    pub fn from_reals(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(
            x.iter().map(|&r| C64::new(r, 0.0)).collect(),
            y.iter().map(|&r| C64::new(r, 0.0)).collect(),
        )
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![C64::new(0.0, 0.0); n],
            y: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Quaternionic dimension `n`.
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn to_real(&self) -> DVector<f64> {
        let n = self.dim();
        let mut v = DVector::zeros(4 * n);
        for k in 0..n {
            v[2 * k] = self.x[k].re;
            v[2 * k + 1] = self.x[k].im;
            v[2 * n + 2 * k] = self.y[k].re;
            v[2 * n + 2 * k + 1] = self.y[k].im;
        }
        v
    }

    pub fn from_real(v: &DVector<f64>) -> Self {
        assert!(v.len() % 4 == 0, "real vector length must be a multiple of 4");
        let n = v.len() / 4;
        let x = (0..n).map(|k| C64::new(v[2 * k], v[2 * k + 1])).collect();
        let y = (0..n)
            .map(|k| C64::new(v[2 * n + 2 * k], v[2 * n + 2 * k + 1]))
            .collect();
        Self { x, y }
    }

    /// Concatenated complex coordinates `(x, y)`.
    pub fn to_complex(&self) -> DVector<C64> {
        DVector::from_iterator(2 * self.dim(), self.x.iter().chain(self.y.iter()).copied())
    }

    pub fn from_complex(v: &DVector<C64>) -> Self {
        let n = v.len() / 2;
        Self {
            x: v.rows(0, n).iter().copied().collect(),
            y: v.rows(n, n).iter().copied().collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x.iter().chain(self.y.iter()).map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            x: self.x.iter().map(|c| c * s).collect(),
            y: self.y.iter().map(|c| c * s).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.y.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// A unit vector `(a, b, c)` naming the complex structure `a·i + b·j + c·k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureLabel {
    dir: [f64; 3],
}

impl StructureLabel {
    pub const I: Self = Self { dir: [1.0, 0.0, 0.0] };
    pub const J: Self = Self { dir: [0.0, 1.0, 0.0] };
    pub const K: Self = Self { dir: [0.0, 0.0, 1.0] };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n2 = a * a + b * b + c * c;
        if !n2.is_finite() || (n2 - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!(
                "structure label ({a}, {b}, {c}) is not a unit vector"
            )));
        }
        Ok(Self { dir: [a, b, c] })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.dir
    }
}

fn apply_i(v: &Tangent) -> Tangent {
    let i = C64::new(0.0, 1.0);
    HVec {
        x: v.x.iter().map(|c| c * i).collect(),
        y: v.y.iter().map(|c| c * i).collect(),
    }
}

fn apply_j(v: &Tangent) -> Tangent {
    HVec {
        x: v.y.iter().map(|c| -c.conj()).collect(),
        y: v.x.iter().map(|c| c.conj()).collect(),
    }
}

/// Applies `a·i + b·j + c·k` to a tangent vector.
pub fn apply_structure(label: &StructureLabel, v: &Tangent) -> Tangent {
    let [a, b, c] = label.dir;
    let iv = apply_i(v);
    let jv = apply_j(v);
    let kv = apply_i(&jv);
    let n = v.dim();
    let combine = |ia: &[C64], ja: &[C64], ka: &[C64]| -> Vec<C64> {
        (0..n).map(|t| ia[t] * a + ja[t] * b + ka[t] * c).collect()
    };
    HVec {
        x: combine(&iv.x, &jv.x, &kv.x),
        y: combine(&iv.y, &jv.y, &kv.y),
    }
}

/// Flat metric `g(u, v) = Re Σ u_k conj(v_k)` over both halves.
pub fn real_inner(u: &Tangent, v: &Tangent) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(u
        .x
        .iter()
        .zip(&v.x)
        .chain(u.y.iter().zip(&v.y))
        .map(|(a, b)| (a * b.conj()).re)
        .sum())
}

/// Real `4n × 4n` matrices of `i`, `j`, `k` in interleaved coordinates.
pub fn structure_matrices(n: usize) -> [DMatrix<f64>; 3] {
    let d = 4 * n;
    let mut i = DMatrix::zeros(d, d);
    for k in 0..2 * n {
        i[(2 * k + 1, 2 * k)] = 1.0;
        i[(2 * k, 2 * k + 1)] = -1.0;
    }
    // j(x, y) = (−ȳ, x̄)
    let mut j = DMatrix::zeros(d, d);
    for k in 0..n {
        let (xr, xi) = (2 * k, 2 * k + 1);
        let (yr, yi) = (2 * n + 2 * k, 2 * n + 2 * k + 1);
        j[(xr, yr)] = -1.0;
        j[(xi, yi)] = 1.0;
        j[(yr, xr)] = 1.0;
        j[(yi, xi)] = -1.0;
    }
    let k = &i * &j;
    [i, j, k]
}

/// An element of SO(3) rotating the reference frame `{i, j, k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    rows: [[f64; 3]; 3],
}

impl Frame {
    pub fn identity() -> Self {
        Self::from_matrix_unchecked(Matrix3::identity())
    }

    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite frame entry".into()));
        }
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > UNIT_TOL || (det - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!(
                "frame is not in SO(3): |RᵀR − I| = {orth:e}, det = {det}"
            )));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&rows.concat()))
    }

    fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        let mut rows = [[0.0; 3]; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        Self { rows }
    }

    /// Rotation by `angle` about coordinate axis `axis ∈ {0, 1, 2}`.
    pub fn axis_rotation(axis: usize, angle: f64) -> Self {
        let v = match axis {
            0 => Vector3::x_axis(),
            1 => Vector3::y_axis(),
            2 => Vector3::z_axis(),
            _ => panic!("axis must be 0, 1 or 2"),
        };
        let r = nalgebra::Rotation3::from_axis_angle(&v, angle);
        Self::from_matrix_unchecked(*r.matrix())
    }

    /// Rotation matrix of the unit quaternion `w + xi + yj + zk` (normalised
    /// here).
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain("degenerate quaternion".into()));
        }
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Self::from_matrix_unchecked(m))
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.rows.concat())
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.rows
    }

    /// Entry `R[l][m]`.
    pub fn entry(&self, l: usize, m: usize) -> f64 {
        self.rows[l][m]
    }

    /// The rotated structure `I'_l = Σ_m R[l][m] I_m`.
    pub fn label(&self, l: usize) -> StructureLabel {
        let [a, b, c] = self.rows[l];
        StructureLabel { dir: [a, b, c] }
    }

    /// Real matrices of the rotated structures `I'_1, I'_2, I'_3`.
    pub fn structure_matrices(&self, n: usize) -> [DMatrix<f64>; 3] {
        let base = structure_matrices(n);
        std::array::from_fn(|l| {
            let mut out = DMatrix::zeros(4 * n, 4 * n);
            for (m, b) in base.iter().enumerate() {
                out += b * self.rows[l][m];
            }
            out
        })
    }
}

impl Default for Frame {
    fn default() -> Self {
        Self::identity()
    }
}

/// Rotates the `R³` index of a moment triple: `(μ'_1, μ'_2, μ'_3)ᵀ = R (μ_1, μ_2, μ_3)ᵀ`,
/// componentwise in the Lie coalgebra.
pub fn rotate_moment(frame: &Frame, m: &MomentValue) -> MomentValue {
    let t = m.triple();
    let rotated: [DVector<f64>; 3] = std::array::from_fn(|l| {
        let mut out = DVector::zeros(t[0].len());
        for (mm, comp) in t.iter().enumerate() {
            out += comp * frame.entry(l, mm);
        }
        out
    });
    MomentValue::from_triple(rotated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hvec_strategy(n: usize) -> impl Strategy<Value = HVec> {
        prop::collection::vec(-3.0f64..3.0, 4 * n)
            .prop_map(|v| HVec::from_real(&DVector::from_vec(v)))
    }

    fn label_strategy() -> impl Strategy<Value = StructureLabel> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 1e-3)
            .prop_map(|(a, b, c)| {
                let n = (a * a + b * b + c * c).sqrt();
                StructureLabel::new(a / n, b / n, c / n).unwrap()
            })
    }

    #[test]
    fn i_multiplies_by_sqrt_minus_one() {
        let v = HVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        let out = apply_structure(&StructureLabel::I, &v);
        assert_eq!(out.x, vec![c(0.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(out.y, vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn j_follows_conjugation_rule() {
        let v = HVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        let out = apply_structure(&StructureLabel::J, &v);
        assert_eq!(out.x, vec![c(0.0, 0.0); 2]);
        assert_eq!(out.y, vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn non_unit_label_rejected() {
        assert!(matches!(StructureLabel::new(1.0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn real_inner_examples() {
        let e1 = HVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        let ie1 = HVec::new(vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        assert_eq!(real_inner(&e1, &e1).unwrap(), 1.0);
        assert_eq!(real_inner(&e1, &ie1).unwrap(), 0.0);
        let u = HVec::new(vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        let v = HVec::new(vec![c(3.0, 0.0), c(4.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        assert_eq!(real_inner(&u, &v).unwrap(), 11.0);
        assert!(matches!(
            real_inner(&u, &HVec::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn state_rejects_nan() {
        assert!(HVec::new(vec![c(f64::NAN, 0.0)], vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn structure_matrices_match_operators() {
        let v = HVec::new(vec![c(0.3, -1.2), c(2.0, 0.5)], vec![c(-0.7, 0.1), c(1.0, 1.0)]).unwrap();
        let mats = structure_matrices(2);
        for (l, lab) in [StructureLabel::I, StructureLabel::J, StructureLabel::K]
            .iter()
            .enumerate()
        {
            let direct = apply_structure(lab, &v).to_real();
            let via = &mats[l] * v.to_real();
            assert!((direct - via).norm() < 1e-14);
        }
    }

    #[test]
    fn quarter_turn_about_first_axis() {
        let r = Frame::axis_rotation(0, std::f64::consts::FRAC_PI_2);
        let m = MomentValue::from_triple([
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![2.0]),
            DVector::from_vec(vec![3.0]),
        ]);
        let out = rotate_moment(&r, &m).triple();
        assert!((out[0][0] - 1.0).abs() < 1e-15);
        assert!((out[1][0] + 3.0).abs() < 1e-15);
        assert!((out[2][0] - 2.0).abs() < 1e-15);
        let same = rotate_moment(&Frame::identity(), &m);
        assert_eq!(same, m);
    }

    #[test]
    fn frame_validation() {
        assert!(Frame::new(Matrix3::identity() * 2.0).is_err());
        assert!(Frame::new(-Matrix3::<f64>::identity()).is_err());
        assert!(Frame::from_quaternion(0.3, -0.2, 0.9, 0.1).is_ok());
    }

    proptest! {
        #[test]
        fn structures_square_to_minus_one(v in hvec_strategy(3), s in label_strategy()) {
            let twice = apply_structure(&s, &apply_structure(&s, &v));
            let err = (twice.to_real() + v.to_real()).norm();
            prop_assert!(err <= 1e-12 * (1.0 + v.norm()));
        }

        #[test]
        fn quaternion_relations(v in hvec_strategy(2)) {
            let i = |w: &HVec| apply_structure(&StructureLabel::I, w);
            let j = |w: &HVec| apply_structure(&StructureLabel::J, w);
            let k = apply_structure(&StructureLabel::K, &v).to_real();
            let ij = i(&j(&v)).to_real();
            let ji = j(&i(&v)).to_real();
            prop_assert!((&ij - &k).norm() <= 1e-12 * (1.0 + v.norm()));
            prop_assert!((ji + k).norm() <= 1e-12 * (1.0 + v.norm()));
        }

        #[test]
        fn structures_are_isometries(v in hvec_strategy(2), w in hvec_strategy(2), s in label_strategy()) {
            let lhs = real_inner(&apply_structure(&s, &v), &apply_structure(&s, &w)).unwrap();
            let rhs = real_inner(&v, &w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + v.norm() * w.norm()));
        }

        #[test]
        fn rotation_preserves_pointwise_norm(
            q in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
                .prop_filter("nonzero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-2),
            vals in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let r = Frame::from_quaternion(q.0, q.1, q.2, q.3).unwrap();
            let m = MomentValue::from_triple([
                DVector::from_vec(vals[0..2].to_vec()),
                DVector::from_vec(vals[2..4].to_vec()),
                DVector::from_vec(vals[4..6].to_vec()),
            ]);
            let rm = rotate_moment(&r, &m).triple();
            let t = m.triple();
            for a in 0..2 {
                let before = (t[0][a].powi(2) + t[1][a].powi(2) + t[2][a].powi(2)).sqrt();
                let after = (rm[0][a].powi(2) + rm[1][a].powi(2) + rm[2][a].powi(2)).sqrt();
                prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before));
            }
        }
    }
}
