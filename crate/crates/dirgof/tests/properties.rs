//! Property tests of the structural invariants: unit-norm closure, tangent
//! basis identities, weight normalization, KDE positivity, and the p-value
//! convention.

use dirgof::estimators::{kde_dir, locpoly_weights, Degree, DirSample};
use dirgof::kernels::DirectionalKernel;
use dirgof::resampling::resampled_p_value;
use dirgof::sphere::{surface_area, tangent_basis};
use dirgof::UnitVector;
use proptest::prelude::*;

fn unit_vector_strategy(q: usize) -> impl Strategy<Value = UnitVector> {
    prop::collection::vec(-1.0f64..1.0, q + 1).prop_filter_map("nonzero ambient vector", |v| {
        UnitVector::from_unnormalized(v).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_vectors_have_unit_norm(v in prop::collection::vec(-10.0f64..10.0, 2..5)) {
        if let Ok(x) = UnitVector::from_unnormalized(v) {
            let norm: f64 = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_unit_inputs_are_repaired_and_far_ones_rejected(
        angle in 0.0f64..(2.0 * std::f64::consts::PI),
        bump in -5e-7f64..5e-7,
    ) {
        let scale = 1.0 + bump;
        let v = vec![scale * angle.cos(), scale * angle.sin()];
        let x = UnitVector::new(v).unwrap();
        let norm: f64 = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);

        let far = vec![1.01 * angle.cos(), 1.01 * angle.sin()];
        prop_assert!(UnitVector::new(far).is_err());
    }

    #[test]
    fn tangent_basis_identities_hold_everywhere(x in unit_vector_strategy(2)) {
        let b = tangent_basis(&x);
        let q = x.q();
        for i in 0..q {
            for j in 0..q {
                let dot: f64 = b.columns()[i]
                    .iter()
                    .zip(&b.columns()[j])
                    .map(|(a, c)| a * c)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - target).abs() < 1e-10);
            }
        }
        for r in 0..=q {
            for c in 0..=q {
                let mut dot = 0.0;
                for col in b.columns() {
                    dot += col[r] * col[c];
                }
                let target = if r == c { 1.0 } else { 0.0 } - x.coords()[r] * x.coords()[c];
                prop_assert!((dot - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kde_is_nonnegative_and_weights_sum_to_one(
        angles in prop::collection::vec(0.0f64..(2.0 * std::f64::consts::PI), 2..12),
        h in 0.15f64..1.5,
        at in 0.0f64..(2.0 * std::f64::consts::PI),
    ) {
        let sample = DirSample::from_angles(&angles).unwrap();
        let x = UnitVector::from_angle(at);
        let l = DirectionalKernel::VonMises;
        let f = kde_dir(&sample, h, &l, &x).unwrap();
        prop_assert!(f >= 0.0);
        // a KDE is bounded by the kernel's maximal normalized value
        prop_assert!(f <= l.c_hq_cached(h, 1).unwrap() * 1.0000001);

        // p = 0 weights are a plain ratio: tight tolerance everywhere
        let w0 = locpoly_weights(&sample, h, &l, Degree::Constant, &x).unwrap();
        prop_assert!((w0.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // p = 1 goes through the local normal-equations solve, whose
        // worst-case floating-point error scales with the condition number;
        // the 1e-10 singular-value cutoff bounds it near 1e-5 for
        // adversarial two-point designs
        match locpoly_weights(&sample, h, &l, Degree::Linear, &x) {
            Ok(w) => prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-5),
            Err(dirgof::DirGofError::RankDeficient { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        }
    }

    #[test]
    fn p_value_convention_bounds(
        observed in -10.0f64..10.0,
        reps in prop::collection::vec(-10.0f64..10.0, 19..200),
    ) {
        let p = resampled_p_value(observed, &reps);
        prop_assert!(p > 0.0 && p <= 1.0);
        // monotone: a larger observed statistic never raises the p-value
        let p_bigger = resampled_p_value(observed + 1.0, &reps);
        prop_assert!(p_bigger <= p);
        // the grid convention: p is a multiple of 1/(B+1)
        let b = reps.len() as f64;
        let k = (p * (b + 1.0)).round();
        prop_assert!((p - k / (b + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn surface_area_is_positive_and_decreasing_beyond_q7(q in 1usize..20) {
        let w = surface_area(q);
        prop_assert!(w > 0.0 && w.is_finite());
        if q >= 7 {
            // ω_q peaks at q = 6 and decays afterwards
            prop_assert!(surface_area(q + 1) < w);
        }
    }
}
