//! Numerical laboratory for linear hyperkähler actions of compact groups on
//! quaternionic vector spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`quaternionic`]: points of `H^n = T*C^n`, the complex structures `i, j, k`
//!   and SO(3) frame arithmetic.
//! - [`lie`]: Lie algebra presentations (structure constants, invariant inner
//!   product) and `u(n)` in its orthonormal skew-Hermitian basis.
//! - [`models`]: the catalog of linear Hamiltonian actions with moment maps,
//!   their differentials and infinitesimal actions.
//! - [`frames`]: subtorus fixed-point data and the general-frame test.
//! - [`flow`]: gradient descent of `‖μ_C‖²` on `V` and of `‖μ₁‖²` on
//!   `W = μ_C⁻¹(0)`, the circle Lyapunov certificate and semistability.
//! - [`critical`]: critical points of `f₂₃`, Hessians, the lifted block matrix
//!   and its adjugate identity.
//! - [`morse`]: exact truncated Poincaré series and base-minus-strata assembly.
//! - [`local_model`]: charts of the blow-up of a homogeneous quadric cone.
//! - [`checks`]: residuals of the structural identities and finite-difference
//!   oracles, shared by the test suites.
//!
//! Sign convention: moment maps are normalised so that
//! `⟨dμ_l(v), ξ⟩ = EPSILON · g(ξ_z, I_l v)` for `l = 1, 2, 3` with
//! [`EPSILON`]` = +1`, i.e. `μ_l^ξ(z) = ½ g(ξ_z, I_l z)` before central
//! shifts. With this choice the catalog's matrix formulas
//! (`μ₁ = (√−1/2)(xx† − y†y)`, `μ_C = xy`, ...) hold verbatim once a matrix
//! `A` is converted to coefficients by `c_a = −tr(A e_a)`.

pub mod checks;
pub mod critical;
pub mod error;
pub mod flow;
pub mod frames;
pub mod lie;
pub mod linalg;
pub mod local_model;
pub mod models;
pub mod morse;
pub mod quaternionic;
pub mod sampling;

pub use error::{Error, Result};
pub use flow::{FlowOptions, FlowStatus, FlowTrace, Objective};
pub use frames::{FrameVerdict, SubtorusDatum};
pub use lie::LieAlgebra;
pub use models::{ActionModel, FramedModel, ModelSpec, MomentValue};
pub use morse::PoincareSeries;
pub use quaternionic::{Frame, HVec, State, StructureLabel, Tangent, C64};

/// Global sign relating the moment-map differential to the metric,
/// `⟨dμ_l(v), ξ⟩ = EPSILON · g(ξ_z, I_l v)`.
pub const EPSILON: f64 = 1.0;

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
