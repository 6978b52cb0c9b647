//! Randomized structural identities of the special functions and the
//! model algebra.

use proptest::prelude::*;

use volcev::pricing::{moment_swap_m_gamma, MomentKernel};
use volcev::specialfn::{bessel_i1, gamma, kummer_m, ln_gamma};
use volcev::{Branch, CoefficientFn, ModelSpec};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #[test]
    fn gamma_recurrence(a in 0.1f64..60.0) {
        let lhs = gamma(a + 1.0).unwrap().value;
        let rhs = a * gamma(a).unwrap().value;
        prop_assert!(rel(lhs, rhs) < 1e-12, "Gamma(a+1) != a Gamma(a) at a={a}");
    }

    #[test]
    fn ln_gamma_tracks_gamma(a in 0.1f64..140.0) {
        let lg = ln_gamma(a).unwrap();
        let g = gamma(a).unwrap().value;
        prop_assert!((lg - g.ln()).abs() < 1e-11 * lg.abs().max(1.0));
    }

    #[test]
    fn kummer_transformation(a in -2.0f64..2.0, z in -15.0f64..15.0) {
        // M(a, b, z) = e^z M(b - a, b, -z); the alternating series on the
        // negative-argument side loses digits to cancellation, so the
        // tolerance uses the reported error estimates
        let b = 2.0;
        let l = kummer_m(a, b, z).unwrap();
        let r = kummer_m(b - a, b, -z).unwrap();
        let rhs = z.exp() * r.value;
        let tol = 1e-9 * l.value.abs().max(1.0)
            + 20.0 * (l.abs_error_estimate + z.exp() * r.abs_error_estimate);
        prop_assert!((l.value - rhs).abs() < tol, "lhs={} rhs={rhs} tol={tol}", l.value);
    }

    #[test]
    fn kummer_contiguous_in_b(a in -2.0f64..2.0, z in -10.0f64..10.0) {
        // M(a, b, z) = M(a - 1, b, z) + (z / b) M(a, b + 1, z)
        let b = 2.0;
        let lhs = kummer_m(a, b, z).unwrap().value;
        let rhs = kummer_m(a - 1.0, b, z).unwrap().value
            + z / b * kummer_m(a, b + 1.0, z).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn bessel_i1_positive_and_increasing(x in 0.01f64..30.0) {
        let v = bessel_i1(x).unwrap().value;
        prop_assert!(v > 0.0);
        prop_assert!(bessel_i1(x * 1.01).unwrap().value > v);
    }

    #[test]
    fn z_factor_multiplicative(
        t0 in 0.0f64..0.5,
        dt1 in 0.01f64..1.0,
        dt2 in 0.01f64..1.0,
        gamma in -0.9f64..-0.1,
    ) {
        let spec = ModelSpec::canonical(Branch::MNeg2Gamma, gamma, 0.3, 0.1).unwrap();
        let (t1, t2) = (t0 + dt1, t0 + dt1 + dt2);
        let whole = spec.z_factor(t0, t2).unwrap();
        let split = spec.z_factor(t0, t1).unwrap() * spec.z_factor(t1, t2).unwrap();
        prop_assert!(rel(whole, split) < 1e-13);
    }

    #[test]
    fn moment_kernel_positive_and_short_time_consistent(
        gamma in -0.9f64..-0.1,
        x in 0.05f64..1.0,
        i in 1u32..=4,
    ) {
        let spec = ModelSpec::canonical(Branch::MNeg2Gamma, gamma, 0.1, 0.1).unwrap();
        let q = MomentKernel::printed(&spec, x, 1e-8, i).unwrap().value().unwrap();
        let limit = x.powf(i as f64 - 1.0 - 2.0 * gamma);
        prop_assert!(q > 0.0);
        prop_assert!(rel(q, limit) < 1e-4);
    }

    #[test]
    fn m_gamma_swap_scales_and_ignores_epsilon(
        x in 0.05f64..1.0,
        lambda in 0.5f64..2.0,
        theta in 0.05f64..0.5,
        i in 1u32..=3,
    ) {
        // the delta law makes V_i depend only on x, q and T
        let a = ModelSpec::canonical(Branch::MGamma, 0.7, theta, 0.1).unwrap();
        let b = ModelSpec::new(
            Branch::MGamma, -0.4, theta, 0.9,
            CoefficientFn::constant(-theta),
            CoefficientFn::constant(0.9),
        ).unwrap();
        let va = moment_swap_m_gamma(&a, x, 1.0, i).unwrap().value;
        let vb = moment_swap_m_gamma(&b, x, 1.0, i).unwrap().value;
        prop_assert_eq!(va, vb);
        let scaled = moment_swap_m_gamma(&a, lambda * x, 1.0, i).unwrap().value;
        prop_assert!(rel(scaled, lambda.powi(i as i32) * va) < 1e-12);
    }
}
