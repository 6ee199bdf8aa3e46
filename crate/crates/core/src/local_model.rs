//! Blow-up of a cone cut out by homogeneous quadrics `f_i(x) = xᵀA_i x`.
//!
//! In the chart `U_p` of the blow-up of `C^n` at the origin, with
//! coordinates `y` and blow-down `x = y_p·(y₁, …, 1, …, y_n)` (the `1` in slot
//! `p`), every `f_i` factors as `y_p²·f̃_i(y)` where `f̃_i` does not involve
//! `y_p`. So the proper transform `{f̃ = 0}` is a product of the exceptional
//! locus `E = {y_p = 0, f̃ = 0}` with the fiber line, glued across charts by
//! `y'_q = (x_q/x_p)·y_p`; the defining equations themselves transform by the
//! square of that ratio, `f̃^{(q)} = (x_p/x_q)²·f̃^{(p)}`.
//!
//! Charts are 0-based: `p ∈ 0..n`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternionic::C64;
use crate::sampling::{derive_seed, rng};

const SYMMETRY_TOL: f64 = 1e-12;
pub const FIBER_TOL: f64 = 1e-14;
pub const PRODUCT_TOL: f64 = 1e-12;
pub const BLOWDOWN_TOL: f64 = 1e-12;
pub const COCYCLE_TOL: f64 = 1e-10;
/// Overlap points need `|x_q/x_p|` at least this large.
const OVERLAP_MIN: f64 = 1e-3;

/// Sparse polynomial with complex coefficients; keys are exponent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: C64) {
        use std::collections::btree_map::Entry;
        let zero = C64::new(0.0, 0.0);
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], C64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coefficient(&self, exps: &[u32]) -> C64 {
        self.terms.get(exps).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, y: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(y).fold(*c, |acc, (&k, v)| acc * v.powu(k)))
            .sum()
    }

    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                out.add_term(d, c * f64::from(e[k]));
            }
        }
        out
    }

    /// Largest coefficient magnitude over monomials involving `var`.
    pub fn dependence_on(&self, var: usize) -> f64 {
        self.terms.iter().filter(|(e, _)| e[var] > 0).map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Exact division by `y_var^power`; fails if some monomial is not divisible.
    pub fn divide_by_power(&self, var: usize, power: u32) -> Result<Self> {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] < power {
                return Err(Error::Domain(format!("monomial {e:?} is not divisible by y{var}^{power}")));
            }
            let mut d = e.clone();
            d[var] -= power;
            out.add_term(d, *c);
        }
        Ok(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (k, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "·y{k}")?,
                    _ => write!(f, "·y{k}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

/// Quadrics `f_i(x) = xᵀA_i x` on `C^n` with symmetric `A_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadricModel {
    n: usize,
    matrices: Vec<DMatrix<C64>>,
}

/// Config form: each matrix is a list of rows of `[re, im]` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadricSpec {
    pub n: usize,
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

impl QuadricModel {
    pub fn new(n: usize, matrices: Vec<DMatrix<C64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("ambient dimension must be positive".into()));
        }
        for (i, a) in matrices.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.nrows(),
                });
            }
            let asym = (a - a.transpose()).norm();
            if asym > SYMMETRY_TOL * (1.0 + a.norm()) {
                return Err(Error::Domain(format!("matrix {i} is not symmetric (residual {asym:e})")));
            }
        }
        Ok(Self { n, matrices })
    }

    pub fn from_spec(spec: &QuadricSpec) -> Result<Self> {
        let mats = spec
            .matrices
            .iter()
            .map(|rows| {
                if rows.len() != spec.n || rows.iter().any(|r| r.len() != spec.n) {
                    return Err(Error::DimensionMismatch {
                        expected: spec.n,
                        got: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(spec.n, spec.n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
            })
            .collect::<Result<_>>()?;
        Self::new(spec.n, mats)
    }

    pub fn to_spec(&self) -> QuadricSpec {
        QuadricSpec {
            n: self.n,
            matrices: self
                .matrices
                .iter()
                .map(|a| (0..self.n).map(|i| (0..self.n).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.matrices
    }

    pub fn eval(&self, x: &[C64]) -> Vec<C64> {
        let v = DVector::from_column_slice(x);
        self.matrices.iter().map(|a| (v.transpose() * a * &v)[0]).collect()
    }

    /// `x₁x₂` on `C²`.
    pub fn node() -> Self {
        let h = C64::new(0.5, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::new(2, vec![DMatrix::from_row_slice(2, 2, &[z, h, h, z])]).unwrap()
    }

    /// `x₁x₃ − x₂²` on `C³`.
    pub fn rank_three_cone() -> Self {
        let r = |v: f64| C64::new(v, 0.0);
        let a = DMatrix::from_row_slice(3, 3, &[r(0.0), r(0.0), r(0.5), r(0.0), r(-1.0), r(0.0), r(0.5), r(0.0), r(0.0)]);
        Self::new(3, vec![a]).unwrap()
    }

    /// A fixed full-rank complex quadric on `C⁴` with small integer entries.
    pub fn generic_four() -> Self {
        let re = [2.0, 1.0, 0.0, -1.0, 1.0, -1.0, 3.0, 0.0, 0.0, 3.0, 1.0, 2.0, -1.0, 0.0, 2.0, -3.0];
        let im = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let a = DMatrix::from_fn(4, 4, |i, j| C64::new(re[4 * i + j], im[4 * i + j]));
        Self::new(4, vec![a]).unwrap()
    }

    /// The three models shipped with the verification suite.
    pub fn shipped() -> Vec<(&'static str, Self)> {
        vec![
            ("node-c2", Self::node()),
            ("rank3-cone-c3", Self::rank_three_cone()),
            ("generic-c4", Self::generic_four()),
        ]
    }
}

/// Equations of the proper transform in one chart; `y_p` is the fiber
/// coordinate.
#[derive(Clone, Debug)]
pub struct BlowupChart {
    pub n: usize,
    pub chart: usize,
    pub equations: Vec<Polynomial>,
}

impl BlowupChart {
    /// Blow-down `x = y_p·(y with slot p set to 1)`.
    pub fn blow_down(&self, y: &[C64]) -> Vec<C64> {
        let s = y[self.chart];
        y.iter().enumerate().map(|(k, &v)| if k == self.chart { s } else { s * v }).collect()
    }

    /// Chart coordinates of a point with `x_p ≠ 0`.
    pub fn lift(&self, x: &[C64]) -> Vec<C64> {
        let s = x[self.chart];
        x.iter().enumerate().map(|(k, &v)| if k == self.chart { s } else { v / s }).collect()
    }

    pub fn eval(&self, y: &[C64]) -> Vec<C64> {
        self.equations.iter().map(|f| f.eval(y)).collect()
    }

    /// Largest coefficient of any monomial containing the fiber coordinate.
    pub fn fiber_dependence(&self) -> f64 {
        self.equations.iter().map(|f| f.dependence_on(self.chart)).fold(0.0, f64::max)
    }
}

/// Substitutes the blow-down into every `f_i` and divides by `y_p²`, with
/// exact polynomial arithmetic.
pub fn blowup_chart(q: &QuadricModel, p: usize) -> Result<BlowupChart> {
    let n = q.n;
    if p >= n {
        return Err(Error::Domain(format!("chart {p} out of range for n = {n}")));
    }
    let yp = Polynomial::variable(n, p);
    let x: Vec<Polynomial> = (0..n)
        .map(|k| if k == p { yp.clone() } else { yp.mul(&Polynomial::variable(n, k)) })
        .collect();
    let equations = q
        .matrices
        .iter()
        .map(|a| {
            let mut f = Polynomial::zero(n);
            for i in 0..n {
                for j in 0..n {
                    if a[(i, j)] != C64::new(0.0, 0.0) {
                        f = f.add(&x[i].mul(&x[j]).scale(a[(i, j)]));
                    }
                }
            }
            f.divide_by_power(p, 2)
        })
        .collect::<Result<_>>()?;
    Ok(BlowupChart { n, chart: p, equations })
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn complex_normal<R: Rng + ?Sized>(r: &mut R) -> C64 {
    C64::new(r.sample(StandardNormal), r.sample(StandardNormal))
}

/// Newton refinement of `y` (fiber slot fixed) on all chart equations.
fn refine(chart: &BlowupChart, y: &mut [C64], iters: usize) -> f64 {
    let p = chart.chart;
    let free: Vec<usize> = (0..y.len()).filter(|&k| k != p).collect();
    let grads: Vec<Vec<Polynomial>> = chart.equations.iter().map(|f| free.iter().map(|&k| f.derivative(k)).collect()).collect();
    let mut res = max_abs(&chart.eval(y));
    for _ in 0..iters {
        if res <= 1e-15 || free.is_empty() {
            break;
        }
        let fval = DVector::from_vec(chart.eval(y));
        let jac = DMatrix::from_fn(chart.equations.len(), free.len(), |i, j| grads[i][j].eval(y));
        let Ok(jp) = jac.pseudo_inverse(1e-12) else { break };
        let step = jp * fval;
        let trial: Vec<C64> = {
            let mut t = y.to_vec();
            for (j, &k) in free.iter().enumerate() {
                t[k] -= step[j];
            }
            t
        };
        let tres = max_abs(&chart.eval(&trial));
        if tres >= res {
            break;
        }
        y.copy_from_slice(&trial);
        res = tres;
    }
    res
}

/// One attempt at a point of `E` in the chart (fiber coordinate zero).
fn sample_exceptional<R: Rng + ?Sized>(chart: &BlowupChart, r: &mut R) -> Option<Vec<C64>> {
    let (n, p) = (chart.n, chart.chart);
    let zero = C64::new(0.0, 0.0);
    let mut y: Vec<C64> = (0..n).map(|k| if k == p { zero } else { complex_normal(r) }).collect();
    match chart.equations.len() {
        0 => return Some(y),
        1 => {
            // exact quadratic along a random line through y
            let d: Vec<C64> = (0..n).map(|k| if k == p { zero } else { complex_normal(r) }).collect();
            let at = |t: C64| -> C64 {
                let pt: Vec<C64> = y.iter().zip(&d).map(|(a, b)| a + b * t).collect();
                chart.equations[0].eval(&pt)
            };
            let g0 = at(zero);
            let g1 = at(C64::new(1.0, 0.0));
            let gm = at(C64::new(-1.0, 0.0));
            let a = (g1 + gm) * 0.5 - g0;
            let b = (g1 - gm) * 0.5;
            let scale = g0.norm() + g1.norm() + gm.norm();
            let t = if a.norm() > 1e-12 * scale {
                let disc = (b * b - a * g0 * 4.0).sqrt();
                // the root with the larger denominator avoids cancellation
                let den = if (b + disc).norm() >= (b - disc).norm() { b + disc } else { b - disc };
                if den.norm() == 0.0 {
                    zero
                } else if r.random_bool(0.5) {
                    -(g0 * 2.0) / den
                } else {
                    -den / (a * 2.0)
                }
            } else if b.norm() > 1e-12 * scale {
                -g0 / b
            } else if g0.norm() <= 1e-14 * (1.0 + scale) {
                complex_normal(r)
            } else {
                return None;
            };
            for k in 0..n {
                y[k] += d[k] * t;
            }
        }
        _ => {}
    }
    let scale: f64 = y.iter().map(|c| c.norm_sqr()).sum::<f64>().max(1.0);
    let res = refine(chart, &mut y, 60);
    (res <= 1e-13 * scale).then_some(y)
}

fn sample_chart(chart: &BlowupChart, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..20 * count.max(1) {
        if out.len() == count {
            break;
        }
        if let Some(y) = sample_exceptional(chart, &mut r) {
            out.push(y);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartCheck {
    pub chart: usize,
    pub equations: Vec<String>,
    pub fiber_dependence: f64,
    pub samples: usize,
    pub product_margin: f64,
    pub blowdown_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeReport {
    pub n: usize,
    pub equations: usize,
    pub charts: Vec<ChartCheck>,
    /// Largest coefficient on a monomial containing the fiber coordinate.
    pub fiber_independence: f64,
    /// Largest `|f̃|` after moving sampled points of `E` along the fiber.
    pub product_margin: f64,
    /// Largest `|f(x)|/(1 + ‖x‖²)` at blown-down points of the proper transform.
    pub blowdown_margin: f64,
    /// Points of the proper transform lying in two charts.
    pub overlap_points: usize,
    /// Largest relative error of `y'_q = (x_q/x_p)·y_p` on overlaps.
    pub cocycle_fiber_margin: f64,
    /// Largest relative error of `f̃^{(q)} = (x_p/x_q)²·f̃^{(p)}` at generic
    /// points of the chart overlaps.
    pub cocycle_equation_margin: f64,
    /// The same fiber law with the squared ratio; reported for contrast, large
    /// whenever overlaps exist.
    pub squared_fiber_law_margin: f64,
    pub passed: bool,
}

struct SampleOutcome {
    product: f64,
    blowdown: f64,
    overlaps: usize,
    fiber: f64,
    squared: f64,
}

/// Checks the product structure of the blow-up chart by chart from `samples`
/// points of `E` per chart, and the transition laws on chart overlaps.
pub fn verify_cone_structure(q: &QuadricModel, samples: usize, seed: u64) -> Result<ConeReport> {
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let n = q.n;
    let charts: Vec<BlowupChart> = (0..n).map(|p| blowup_chart(q, p)).collect::<Result<_>>()?;
    let points: Vec<Vec<Vec<C64>>> = charts
        .par_iter()
        .map(|c| sample_chart(c, samples, derive_seed(seed, c.chart as u64)))
        .collect();
    let found: usize = points.iter().map(Vec::len).sum();
    if found < samples {
        return Err(Error::Sampling(format!("found {found} points on E, need {samples}")));
    }

    let mut checks = Vec::with_capacity(n);
    let mut overlap_points = 0;
    let (mut fiber_m, mut squared_m) = (0.0f64, 0.0f64);
    for (chart, pts) in charts.iter().zip(&points) {
        let p = chart.chart;
        let outcomes: Vec<SampleOutcome> = pts
            .par_iter()
            .enumerate()
            .map(|(k, y)| {
                let mut r = rng(derive_seed(seed ^ 0x5eed, (p * samples + k) as u64));
                let s = complex_normal(&mut r);
                let mut moved = y.clone();
                moved[p] = s;
                let base = max_abs(&chart.eval(y));
                let product = max_abs(&chart.eval(&moved)).max((max_abs(&chart.eval(&moved)) - base).abs());
                let x = chart.blow_down(&moved);
                let xn: f64 = x.iter().map(|c| c.norm_sqr()).sum();
                let blowdown = max_abs(&q.eval(&x)) / (1.0 + xn);
                let mut out = SampleOutcome {
                    product,
                    blowdown,
                    overlaps: 0,
                    fiber: 0.0,
                    squared: 0.0,
                };
                for other in charts.iter().filter(|c| c.chart != p) {
                    let qi = other.chart;
                    let ratio = x[qi] / x[p];
                    if ratio.norm() < OVERLAP_MIN {
                        continue;
                    }
                    let y2 = other.lift(&x);
                    let fiber_expect = ratio * moved[p];
                    out.overlaps += 1;
                    out.fiber = out.fiber.max((y2[qi] - fiber_expect).norm() / y2[qi].norm());
                    out.squared = out.squared.max((y2[qi] - ratio * ratio * moved[p]).norm() / y2[qi].norm());
                }
                out
            })
            .collect();
        let product_margin = outcomes.iter().map(|o| o.product).fold(0.0, f64::max);
        let blowdown_margin = outcomes.iter().map(|o| o.blowdown).fold(0.0, f64::max);
        overlap_points += outcomes.iter().map(|o| o.overlaps).sum::<usize>();
        fiber_m = outcomes.iter().map(|o| o.fiber).fold(fiber_m, f64::max);
        squared_m = outcomes.iter().map(|o| o.squared).fold(squared_m, f64::max);
        checks.push(ChartCheck {
            chart: p,
            equations: chart.equations.iter().map(|f| f.to_string()).collect(),
            fiber_dependence: chart.fiber_dependence(),
            samples: pts.len(),
            product_margin,
            blowdown_margin,
        });
    }

    // Equation law at generic points (off the proper transform).
    let mut r = rng(derive_seed(seed, 0xc0c));
    let mut equation_m = 0.0f64;
    for cp in &charts {
        for cq in charts.iter().filter(|c| c.chart != cp.chart) {
            for _ in 0..samples {
                let x: Vec<C64> = (0..n).map(|_| complex_normal(&mut r)).collect();
                let yp = cp.lift(&x);
                let yq = cq.lift(&x);
                let ratio2 = (x[cp.chart] / x[cq.chart]).powu(2);
                for (fp, fq) in cp.equations.iter().zip(&cq.equations) {
                    let (vp, vq) = (fp.eval(&yp), fq.eval(&yq));
                    let expect = ratio2 * vp;
                    equation_m = equation_m.max((vq - expect).norm() / vq.norm().max(expect.norm()).max(1e-300));
                }
            }
        }
    }

    let fiber_independence = checks.iter().map(|c| c.fiber_dependence).fold(0.0, f64::max);
    let product_margin = checks.iter().map(|c| c.product_margin).fold(0.0, f64::max);
    let blowdown_margin = checks.iter().map(|c| c.blowdown_margin).fold(0.0, f64::max);
    let passed = fiber_independence <= FIBER_TOL
        && product_margin <= PRODUCT_TOL
        && blowdown_margin <= BLOWDOWN_TOL
        && fiber_m <= COCYCLE_TOL
        && equation_m <= COCYCLE_TOL;
    Ok(ConeReport {
        n,
        equations: q.matrices.len(),
        charts: checks,
        fiber_independence,
        product_margin,
        blowdown_margin,
        overlap_points,
        cocycle_fiber_margin: fiber_m,
        cocycle_equation_margin: equation_m,
        squared_fiber_law_margin: squared_m,
        passed,
    })
}
