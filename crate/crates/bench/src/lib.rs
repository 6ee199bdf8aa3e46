//! Fixtures shared by the benchmarks.

use hkq_core::models::Constants;
use hkq_core::sampling::{gaussian_state, rng};
use hkq_core::{ActionModel, ModelSpec, State, C64};

/// `ADHM(n, 1)` with central constants that keep `f₂₃` off zero.
pub fn adhm(n: usize) -> ActionModel {
    ModelSpec::adhm(n, 1)
        .with_constants(Constants {
            c1_scalar: Some(0.5),
            c_c_scalar: Some([1.0, 0.0]),
            ..Default::default()
        })
        .build()
        .expect("catalog model")
}

pub fn circle(n: usize) -> ActionModel {
    ModelSpec::circle(n, C64::new(1.0, 0.0)).build().expect("catalog model")
}

pub fn state(model: &ActionModel, seed: u64) -> State {
    gaussian_state(&mut rng(seed), model.n(), 1.0)
}
