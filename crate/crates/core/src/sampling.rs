//! Seeded random draws: states, Lie algebra vectors and Haar rotations.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::quaternionic::{Frame, HVec, State, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-item seed derived from a sweep seed, so parallel sweeps stay
/// deterministic regardless of scheduling.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard complex Gaussian state scaled by `scale`.
pub fn gaussian_state<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> State {
    let mut draw = || C64::new(normal(rng) * scale, normal(rng) * scale);
    let x = (0..n).map(|_| draw()).collect();
    let y = (0..n).map(|_| draw()).collect();
    HVec::new(x, y).expect("finite draws")
}

/// State with `‖z‖² ≤ rho_max`: uniform direction, `‖z‖²` uniform in
/// `[0, rho_max]`.
pub fn state_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, rho_max: f64) -> State {
    let dir = gaussian_state(rng, n, 1.0);
    let norm = dir.norm();
    let rho: f64 = rng.random_range(0.0..=rho_max);
    if norm == 0.0 {
        return HVec::zeros(n);
    }
    dir.scale(rho.sqrt() / norm)
}

/// Unit-norm random state.
pub fn unit_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> State {
    let z = gaussian_state(rng, n, 1.0);
    let norm = z.norm();
    z.scale(1.0 / norm)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| normal(rng))
}

/// Haar-uniform rotation from a uniform unit quaternion.
pub fn haar_frame<R: Rng + ?Sized>(rng: &mut R) -> Frame {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| normal(rng));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return Frame::from_quaternion(q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm)
                .expect("unit quaternion gives a rotation");
        }
    }
}

/// Infinite stream of Haar frames from a seed.
pub fn haar_frames(seed: u64) -> impl Iterator<Item = Frame> {
    let mut r = rng(seed);
    std::iter::repeat_with(move || haar_frame(&mut r))
}
