//! Exact truncated Poincaré series and equivariantly perfect assembly.
//!
//! For a flow-closed model the stratification by the `f₂₃` descent is
//! equivariantly perfect, so the equivariant series of the ambient space is
//! the quotient-level series plus `Σ t^λ·P_t^K(C)` over the non-minimal
//! critical sets. [`assemble_quotient_series`] inverts that identity. The
//! summation formula is the standard consequence of perfection rather than an
//! identity derived here.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::critical::{find_critical_points, hessian_f23, morse_index, CriticalOptions, MorseIndex};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::quaternionic::{Frame, HVec, State, C64};
use crate::sampling::{gaussian_state, SeededRng};

/// Power series in `t` with integer coefficients, truncated after degree
/// `cap`. Arithmetic is exact; overflow panics.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoincareSeries {
    coefficients: Vec<i64>,
    cap: usize,
}

impl PoincareSeries {
    pub fn zero(cap: usize) -> Self {
        Self {
            coefficients: vec![0; cap + 1],
            cap,
        }
    }

    pub fn one(cap: usize) -> Self {
        Self::monomial(0, 1, cap)
    }

    /// `coef·t^degree`, or zero if `degree > cap`.
    pub fn monomial(degree: usize, coef: i64, cap: usize) -> Self {
        let mut s = Self::zero(cap);
        if degree <= cap {
            s.coefficients[degree] = coef;
        }
        s
    }

    /// Coefficients past `cap` are dropped; missing ones are zero.
    pub fn from_coefficients(coefficients: &[i64], cap: usize) -> Self {
        let mut s = Self::zero(cap);
        for (d, &c) in coefficients.iter().enumerate().take(cap + 1) {
            s.coefficients[d] = c;
        }
        s
    }

    /// `1/(1 − t^step)`.
    pub fn geometric(step: usize, cap: usize) -> Self {
        assert!(step > 0, "geometric series needs a positive step");
        let mut s = Self::zero(cap);
        for d in (0..=cap).step_by(step) {
            s.coefficients[d] = 1;
        }
        s
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn coefficient(&self, degree: usize) -> i64 {
        self.coefficients.get(degree).copied().unwrap_or(0)
    }

    /// Highest degree with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.iter().rposition(|&c| c != 0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    /// Coefficients up to the last nonzero one.
    pub fn trimmed(&self) -> &[i64] {
        &self.coefficients[..self.degree().map_or(0, |d| d + 1)]
    }

    /// Re-truncates at a smaller or larger cap (new high coefficients are zero).
    pub fn with_cap(&self, cap: usize) -> Self {
        Self::from_coefficients(&self.coefficients, cap)
    }

    /// Multiplication by `t^degree`.
    pub fn shift(&self, degree: usize) -> Self {
        let mut s = Self::zero(self.cap);
        for d in degree..=self.cap {
            s.coefficients[d] = self.coefficients[d - degree];
        }
        s
    }

    /// Lowest degree carrying a negative coefficient.
    pub fn first_negative(&self) -> Option<(usize, i64)> {
        self.coefficients.iter().enumerate().find(|(_, &c)| c < 0).map(|(d, &c)| (d, c))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.first_negative().is_none()
    }

    /// Whether the trimmed coefficient sequence reads the same backwards.
    /// Only meaningful when the series is a polynomial well inside the cap.
    pub fn is_palindromic(&self) -> bool {
        let c = self.trimmed();
        c.iter().eq(c.iter().rev())
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(self.cap), |acc, _| &acc * self)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(i64, i64) -> Option<i64>) -> Self {
        let cap = self.cap.min(other.cap);
        let coefficients = (0..=cap)
            .map(|d| op(self.coefficients[d], other.coefficients[d]).expect("series coefficient overflow"))
            .collect();
        Self { coefficients, cap }
    }
}

impl Add for &PoincareSeries {
    type Output = PoincareSeries;
    fn add(self, rhs: Self) -> PoincareSeries {
        self.zip_with(rhs, i64::checked_add)
    }
}

impl Sub for &PoincareSeries {
    type Output = PoincareSeries;
    fn sub(self, rhs: Self) -> PoincareSeries {
        self.zip_with(rhs, i64::checked_sub)
    }
}

impl Neg for &PoincareSeries {
    type Output = PoincareSeries;
    fn neg(self) -> PoincareSeries {
        &PoincareSeries::zero(self.cap) - self
    }
}

/// Cauchy product, truncated at the smaller cap.
impl Mul for &PoincareSeries {
    type Output = PoincareSeries;
    fn mul(self, rhs: Self) -> PoincareSeries {
        let cap = self.cap.min(rhs.cap);
        let mut out = PoincareSeries::zero(cap);
        for i in 0..=cap {
            let a = self.coefficients[i];
            if a == 0 {
                continue;
            }
            for j in 0..=cap - i {
                let term = a.checked_mul(rhs.coefficients[j]).expect("series coefficient overflow");
                out.coefficients[i + j] = out.coefficients[i + j].checked_add(term).expect("series coefficient overflow");
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for PoincareSeries {
            type Output = PoincareSeries;
            fn $m(self, rhs: Self) -> PoincareSeries {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Polynomial notation, e.g. `1 + t^2 + 2t^4 + O(t^7)`.
impl fmt::Display for PoincareSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (d, &c) in self.coefficients.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0 { '-' } else { '+' })?;
            }
            first = false;
            match (d, mag) {
                (0, _) => write!(f, "{mag}")?,
                (1, 1) => write!(f, "t")?,
                (1, _) => write!(f, "{mag}t")?,
                (_, 1) => write!(f, "t^{d}")?,
                _ => write!(f, "{mag}t^{d}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(t^{})", self.cap + 1)
    }
}

/// Groups whose classifying-space series is known in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "kebab-case")]
pub enum ClassifyingGroup {
    Circle,
    Torus { rank: usize },
    Unitary { n: usize },
}

/// `P_t(BK)`: `1/(1−t²)` for the circle, its `r`-th power for a rank-`r`
/// torus and `Π_{i≤n} 1/(1−t^{2i})` for `U(n)`.
pub fn classifying_series(group: ClassifyingGroup, cap: usize) -> PoincareSeries {
    match group {
        ClassifyingGroup::Circle => PoincareSeries::geometric(2, cap),
        ClassifyingGroup::Torus { rank } => PoincareSeries::geometric(2, cap).pow(rank as u32),
        ClassifyingGroup::Unitary { n } => {
            (1..=n).fold(PoincareSeries::one(cap), |acc, i| &acc * &PoincareSeries::geometric(2 * i, cap))
        }
    }
}

/// One non-minimal critical set: its Morse index `λ` and equivariant series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumDatum {
    pub index: usize,
    pub series: PoincareSeries,
    pub label: String,
}

impl StratumDatum {
    pub fn new(index: usize, series: PoincareSeries, label: impl Into<String>) -> Result<Self> {
        if index % 2 != 0 {
            return Err(Error::Domain(format!("stratum index {index} is odd")));
        }
        Ok(Self {
            index,
            series,
            label: label.into(),
        })
    }

    /// A stratum through a fixed component `F` of the whole group:
    /// `P_t^K(F) = P_t(BK)·P_t(F)`.
    pub fn fixed_component(index: usize, group: ClassifyingGroup, component: &PoincareSeries, label: impl Into<String>) -> Result<Self> {
        let bk = classifying_series(group, component.cap());
        Self::new(index, &bk * component, label)
    }
}

/// Series of a set induced from a stabilizer, `K ×_S Y`: its `K`-equivariant
/// cohomology is the `S`-equivariant cohomology of `Y`. When `S` acts
/// trivially on `Y` that is `P_t(BS)·P_t(Y)`; the caller supplies `P_t(BS)`.
pub fn induced_series(stabilizer_classifying: &PoincareSeries, fiber: &PoincareSeries) -> PoincareSeries {
    stabilizer_classifying * fiber
}

/// `base − Σ t^λ·P_λ`, truncated at `cap`. A negative coefficient means the
/// stratification was not perfect and is reported with its degree.
pub fn assemble_quotient_series(base: &PoincareSeries, strata: &[StratumDatum], cap: usize) -> Result<PoincareSeries> {
    let mut out = base.with_cap(cap);
    for s in strata {
        if s.index > cap {
            return Err(Error::Domain(format!("stratum '{}' has index {} beyond cap {cap}", s.label, s.index)));
        }
        out = &out - &s.series.with_cap(cap).shift(s.index);
    }
    match out.first_negative() {
        Some((degree, coefficient)) => Err(Error::PerfectionViolation { degree, coefficient }),
        None => Ok(out),
    }
}

/// Default truncation degree for a model of quaternionic dimension `n`.
pub fn default_cap(n: usize) -> usize {
    2 * n + 2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleExample {
    pub n: usize,
    pub series: PoincareSeries,
    /// `(1 − t^{2n})/(1 − t²)` computed independently.
    pub closed_form: PoincareSeries,
    pub origin_index: MorseIndex,
    pub critical_values: Vec<f64>,
    pub seeds: usize,
}

const PIPELINE_SEEDS: usize = 8;

/// End to end for the circle on `T*C^n` with `μ_C = x·y − c`, `c ≠ 0`: finds
/// the critical points of `f₂₃`, checks that the origin is the only
/// non-minimal one with index `2n`, and assembles `P_t(BS¹) − t^{2n}P_t(BS¹)`.
pub fn circle_example(n: usize, c: C64, cap: usize) -> Result<CircleExample> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    if c.norm() == 0.0 {
        return Err(Error::Domain("the constant must be nonzero".into()));
    }
    let model = ModelSpec::circle(n, c).build()?;
    let frame = Frame::identity();
    let mut rng = SeededRng::seed_from_u64(n as u64);
    let mut seeds: Vec<State> = vec![HVec::zeros(n)];
    seeds.extend((0..PIPELINE_SEEDS).map(|_| gaussian_state(&mut rng, n, 1.0)));
    let search = find_critical_points(&model, &frame, &seeds, &CriticalOptions::default())?;
    let non_minimal: Vec<_> = search.points.iter().filter(|p| p.f > 1e-12).collect();
    if non_minimal.len() != 1 || non_minimal[0].z.norm() > 1e-8 {
        return Err(Error::CheckFailed(format!(
            "expected the origin as the only non-minimal critical point, found {}",
            non_minimal.len()
        )));
    }
    let origin_index = morse_index(&hessian_f23(&model, &frame, &HVec::zeros(n))?);
    if origin_index.index != 2 * n {
        return Err(Error::CheckFailed(format!("origin has index {}, expected {}", origin_index.index, 2 * n)));
    }
    let base = classifying_series(ClassifyingGroup::Circle, cap);
    // the origin is fixed by the circle and is a point
    let stratum = StratumDatum::fixed_component(origin_index.index, ClassifyingGroup::Circle, &PoincareSeries::one(cap), "origin")?;
    let series = assemble_quotient_series(&base, &[stratum], cap)?;
    let closed_form = &(&PoincareSeries::one(cap) - &PoincareSeries::monomial(2 * n, 1, cap)) * &base;
    if series != closed_form {
        return Err(Error::CheckFailed(format!("assembled {series} differs from {closed_form}")));
    }
    Ok(CircleExample {
        n,
        series,
        closed_form,
        origin_index,
        critical_values: search.points.iter().map(|p| p.f).collect(),
        seeds: seeds.len(),
    })
}

/// The series of [`circle_example`].
pub fn circle_example_pipeline(n: usize, c: C64, cap: usize) -> Result<PoincareSeries> {
    circle_example(n, c, cap).map(|e| e.series)
}
