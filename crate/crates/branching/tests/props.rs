//! Property-based invariants over randomized law parameters.

use branching::analytic::AnalyticEngine;
use branching::asymptotics::d_hat;
use branching::laws::{ImmigrationLaw, IntensityLaw, LawSet, OffspringLaw, SlowlyVarying};
use branching::transforms::TransformChain;
use proptest::prelude::*;

fn lawset(gamma: f64, alpha: f64) -> LawSet {
    LawSet::new(
        OffspringLaw::standard(gamma).unwrap(),
        ImmigrationLaw::sibuya(alpha).unwrap(),
        IntensityLaw::standard(2.0, 1.0).unwrap(),
        1.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trips(
        gamma in 0.2f64..=1.0,
        alpha in 0.2f64..=1.0,
        log_x in 0.0f64..20.0,
    ) {
        let chain = TransformChain::with_defaults(lawset(gamma, alpha)).unwrap();
        let x = log_x.exp();
        let y = chain.v(x).unwrap();
        let back = chain.w(y).unwrap();
        prop_assert!((back - x).abs() <= 2e-12 * x + 1e-12, "x={x} back={back}");
        let p = chain.psi(x).unwrap();
        if p >= 1.0 {
            let xp = chain.psi_inv(p).unwrap();
            prop_assert!((xp - x).abs() <= 2e-12 * x + 1e-12);
        }
    }

    #[test]
    fn masses_are_a_subprobability_with_exact_tail(
        gamma in 0.05f64..=1.0,
        kmax in 8usize..2000,
    ) {
        let law = OffspringLaw::standard(gamma).unwrap();
        let p = law.masses(kmax).unwrap();
        let mut total = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            prop_assert!(pk >= 0.0, "negative mass at k={k}");
            total += pk;
        }
        prop_assert!(total <= 1.0 + 1e-12);
        // The analytic tail closes the gap.
        let tail = law.tail(kmax as u64).unwrap();
        prop_assert!((total + tail - 1.0).abs() < 1e-10, "total={total} tail={tail}");
    }

    #[test]
    fn f_is_monotone_and_bounded(
        gamma in 0.2f64..=1.0,
        t in 0.0f64..50.0,
        s in 0.0f64..1.0,
    ) {
        let engine = AnalyticEngine::with_defaults(lawset(gamma, 0.5)).unwrap();
        let f = engine.f(t, s).unwrap();
        prop_assert!((s..=1.0).contains(&f));
        let later = engine.f(t + 1.0, s).unwrap();
        prop_assert!(later >= f - 1e-12);
    }

    #[test]
    fn scaled_transform_is_a_laplace_transform_candidate(
        alpha_frac in 0.05f64..=1.0,
        gamma in 0.1f64..=1.0,
        lam in -6.0f64..6.0,
    ) {
        // alpha <= gamma not required; only alpha in (0,1].
        let alpha = alpha_frac * gamma.min(1.0);
        if alpha <= 0.0 { return Ok(()); }
        let l = 10f64.powf(lam);
        let v = d_hat(alpha, gamma, l);
        prop_assert!((0.0..=1.0).contains(&v));
        let v2 = d_hat(alpha, gamma, l * 1.5);
        prop_assert!(v2 <= v + 1e-12);
    }
}
