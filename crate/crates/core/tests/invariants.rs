use hkq_core::checks::*;
use hkq_core::critical::{hessian_f23, morse_index};
use hkq_core::flow::{integrate_descent, FlowOptions, Objective};
use hkq_core::models::eval_moment;
use hkq_core::sampling::{gaussian_state, gaussian_vector, haar_frame, rng};
use hkq_core::{ActionModel, Frame, HVec, ModelSpec, C64, EPSILON};
use proptest::prelude::*;

fn models() -> Vec<(&'static str, ActionModel)> {
    catalog().into_iter().map(|(n, s)| (n, s.build().unwrap())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moment_is_equivariant(idx in 0usize..9, seed in any::<u64>(), t in 0.0f64..1.0) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let mut r = rng(seed);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let xi = gaussian_vector(&mut r, m.lie().dim());
        let res = equivariance_residual(m, &xi, t, &z).unwrap();
        prop_assert!(res <= 1e-8, "{name}: {res:e}");
    }

    #[test]
    fn one_sign_fits_every_model_frame_and_structure(idx in 0usize..9, seed in any::<u64>()) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let mut r = rng(seed);
        let f = haar_frame(&mut r);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let v = gaussian_state(&mut r, m.n(), 1.0);
        let xi = gaussian_vector(&mut r, m.lie().dim());
        let res = differential_identity_residual(m, &f, &z, &v, &xi, EPSILON).unwrap();
        prop_assert!(res <= 1e-10, "{name}: {res:e}");
    }

    #[test]
    fn complex_moment_is_holomorphic(idx in 0usize..9, seed in any::<u64>()) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let mut r = rng(seed);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let v = gaussian_state(&mut r, m.n(), 1.0);
        let res = holomorphicity_residual(m, &z, &v).unwrap();
        prop_assert!(res <= 1e-10, "{name}: {res:e}");
    }

    #[test]
    fn moment_is_quadratically_homogeneous(idx in 0usize..9, seed in any::<u64>(), t in -3.0f64..3.0) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let z = gaussian_state(&mut rng(seed), m.n(), 1.0);
        let res = homogeneity_residual(m, &z, t).unwrap();
        prop_assert!(res <= 1e-12, "{name}: {res:e}");
    }

    #[test]
    fn frames_rotate_the_moment(idx in 0usize..9, seed in any::<u64>()) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let mut r = rng(seed);
        let f = haar_frame(&mut r);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let res = frame_covariance_residual(m, &f, &z).unwrap();
        prop_assert!(res <= 1e-12, "{name}: {res:e}");
    }

    #[test]
    fn action_fields_are_orthogonal_on_the_real_level(idx in 0usize..9, seed in any::<u64>()) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        if let Some((res, _)) = orthogonality_residual(m, &mut rng(seed), 1.0).unwrap() {
            prop_assert!(res <= 1e-8, "{name}: {res:e}");
        }
    }

    #[test]
    fn analytic_derivatives_match_differences(idx in 0usize..9, seed in any::<u64>()) {
        let ms = models();
        let (name, m) = &ms[idx % ms.len()];
        let mut r = rng(seed);
        let f = haar_frame(&mut r);
        let z = gaussian_state(&mut r, m.n(), 1.0);
        let g = gradient_fd_error(m, &f, &z).unwrap();
        let h = hessian_fd_error(m, &f, &z).unwrap();
        prop_assert!(g <= 1e-6, "{name}: gradient {g:e}");
        prop_assert!(h <= 1e-5, "{name}: hessian {h:e}");
    }

    #[test]
    fn descent_never_increases_the_objective(seed in any::<u64>(), c in -2.0f64..2.0) {
        let m = ModelSpec::circle(2, C64::new(c, 0.5)).build().unwrap();
        let z0 = gaussian_state(&mut rng(seed), 2, 1.5);
        let opts = FlowOptions { max_time: 50.0, ..Default::default() };
        let tr = integrate_descent(&m, &Frame::identity(), Objective::F23OnV, &z0, &opts).unwrap();
        let f0 = tr.first().f;
        for w in tr.samples.windows(2) {
            prop_assert!(w[1].f <= w[0].f + 1e-9 * (1.0 + f0));
        }
    }
}

#[test]
fn circle_origin_inertia_is_balanced() {
    for n in [1, 2, 3, 5] {
        let m = ModelSpec::circle(n, C64::new(1.0, 0.0)).build().unwrap();
        let h = hessian_f23(&m, &Frame::identity(), &HVec::zeros(n)).unwrap();
        assert_eq!(h.inertia, (2 * n, 0, 2 * n));
        assert_eq!(morse_index(&h).index, 2 * n);
    }
}

#[test]
fn zero_state_has_zero_homogeneous_moment() {
    for (name, m) in models() {
        let mv = eval_moment(&m, &Frame::identity(), &HVec::zeros(m.n())).unwrap();
        let c = m.constants();
        let diff = (&mv.mu1 + &c.mu1).norm() + (&mv.mu_c + &c.mu_c).norm();
        assert!(diff == 0.0, "{name}");
    }
}
