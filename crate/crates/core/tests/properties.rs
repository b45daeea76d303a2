use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dfs_qkd::channel::{delta_params, randomized_survival, survival_probability};
use dfs_qkd::detection::{expected_qber, simulate_rotation, NoiseConfig};
use dfs_qkd::hilbert::Target;
use dfs_qkd::protocol::{alice_pipeline, bob_pipeline, outcome_probabilities, prepare};
use dfs_qkd::{BasisChoice, CollectiveRotation, LogicalState, ModePair, PairState, PhaseMask, PhotonMode, Pol, Scheme};

fn rotation() -> impl Strategy<Value = CollectiveRotation> {
    any::<u64>().prop_map(|s| CollectiveRotation::haar_sample(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn logical() -> impl Strategy<Value = LogicalState> {
    prop::sample::select(LogicalState::ALL.to_vec())
}

fn bin0_state() -> impl Strategy<Value = PairState> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| {
            let modes = [
                ModePair(PhotonMode::h(0), PhotonMode::h(0)),
                ModePair(PhotonMode::h(0), PhotonMode::v(0)),
                ModePair(PhotonMode::v(0), PhotonMode::h(0)),
                ModePair(PhotonMode::v(0), PhotonMode::v(0)),
            ];
            PairState::pure(modes.into_iter().zip(v.into_iter().map(|(a, b)| Complex64::new(a, b)))).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delta_norm_is_one(u in rotation()) {
        prop_assert!((delta_params(&u).norm_sqr_sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotations_preserve_norm(u in rotation(), s in bin0_state()) {
        for t in [Target::First, Target::Second, Target::Both] {
            let out = s.apply_pol_unitary(&u.matrix(), t).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tagging_preserves_norm_and_overflows_past_two(s in bin0_state()) {
        let once = s.tag(Pol::V).unwrap();
        prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
        let twice = once.tag(Pol::V).unwrap();
        let has_v = s.support(1e-14).iter().any(|(m, _)| m.0.pol() == Pol::V || m.1.pol() == Pol::V);
        prop_assert_eq!(twice.tag(Pol::V).is_err(), has_v);
    }

    #[test]
    fn tags_commute(s in bin0_state()) {
        let hv = s.tag(Pol::H).unwrap().tag(Pol::V).unwrap();
        let vh = s.tag(Pol::V).unwrap().tag(Pol::H).unwrap();
        prop_assert!(hv.max_abs_diff(&vh) < 1e-15);
    }

    #[test]
    fn rotation_is_linear(u in rotation(), a in bin0_state(), b in bin0_state(), k in -2.0f64..2.0) {
        let m = u.matrix();
        let mut sum = *a.amplitudes();
        for (x, y) in sum.iter_mut().zip(b.amplitudes()) {
            *x += *y * k;
        }
        let lhs = PairState::from_amplitudes(sum);
        prop_assume!(lhs.is_ok());
        let lhs = lhs.unwrap().apply_pol_unitary(&m, Target::Both).unwrap();
        let ra = a.apply_pol_unitary(&m, Target::Both).unwrap();
        let rb = b.apply_pol_unitary(&m, Target::Both).unwrap();
        for i in 0..36 {
            let want = ra.amplitudes()[i] + rb.amplitudes()[i] * k;
            prop_assert!((lhs.amplitudes()[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn post_selected_weight_is_survival(u in rotation(), l in logical(), q in 0u8..4) {
        let s = alice_pipeline(&prepare(l), &CollectiveRotation::identity(), &u).unwrap();
        let s = bob_pipeline(&s, PhaseMask::new(q).unwrap()).unwrap();
        let (_, w) = s.project_equal_bins();
        prop_assert!((w - survival_probability(&u)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_rounds_never_err(u in rotation(), l in logical(), q in 0u8..4, flip in any::<bool>()) {
        let b = if flip { CollectiveRotation::bit_flip() } else { CollectiveRotation::identity() };
        let s = bob_pipeline(&alice_pipeline(&prepare(l), &b, &u).unwrap(), PhaseMask::new(q).unwrap()).unwrap();
        let p = outcome_probabilities(&s, l.basis());
        let wrong = if l.bit() == 0 { p.different } else { p.same };
        prop_assert!(wrong < 1e-12);
        let other = match l.basis() { BasisChoice::PlusMinus => BasisChoice::PlusMinusI, BasisChoice::PlusMinusI => BasisChoice::PlusMinus };
        let q = outcome_probabilities(&s, other);
        prop_assert!((q.same - q.different).abs() < 1e-12);
    }

    #[test]
    fn flip_half_bounds(u in rotation()) {
        let p = randomized_survival(&u, Scheme::FlipHalf);
        prop_assert!((0.25 - 1e-12..=0.5 + 1e-12).contains(&p));
    }

    #[test]
    fn qber_falls_with_survival(s1 in 0.01f64..1.0, s2 in 0.01f64..1.0) {
        let cfg = NoiseConfig::long_fiber();
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(expected_qber(&cfg, hi) <= expected_qber(&cfg, lo) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conclusive_count_scales_with_duration(seed in any::<u64>()) {
        let cfg = NoiseConfig::short_fiber();
        let u = CollectiveRotation::identity();
        let a = simulate_rotation(&cfg, &u, Scheme::None, 10.0, seed).unwrap();
        let b = simulate_rotation(&cfg, &u, Scheme::None, 40.0, seed ^ 1).unwrap();
        let ratio = b.conclusive as f64 / a.conclusive as f64;
        // Poisson counts of ~1100 and ~4500: 4 ± 0.5 is beyond 3σ.
        prop_assert!((ratio - 4.0).abs() < 0.5, "ratio {}", ratio);
    }
}
