use dssn_core::models::{argmax_first, TableClassifier};
use dssn_core::noise::{
    quantized_noisy, split_coord_general, split_transform_simple, split_value, splits_from_base, GENERATOR_MT19937,
};
use dssn_core::oracle::{self, Budget, Joint};
use dssn_core::{certify_dssn, predict, smooth_exact_dssn, GapRule, QuantizedPoint, Radius, Rational, SplitSpec};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn small_instance() -> impl Strategy<Value = (u32, u32, u64, u64)> {
    (1u32..=4, 1u32..=8, any::<u64>(), any::<u64>()).prop_map(|(q, l, s1, s2)| (q, l.max(1), s1 % 1000, s2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Scores are counts out of `L` and the prediction is the first maximum.
    #[test]
    fn exact_scores_are_counts_out_of_l((q, period, vseed, tseed) in small_instance(), lv in prop::collection::vec(0u32..=4, 2)) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, vseed, 2, q, period).unwrap();
        let table = TableClassifier::random(2, q, period, 3, tseed).unwrap();
        let x = QuantizedPoint::new(lv.iter().map(|&v| v.min(q)).collect(), q).unwrap();
        let s = smooth_exact_dssn(&table, &x, &spec).unwrap();
        prop_assert_eq!(s.total, period as u64);
        prop_assert_eq!(s.counts.iter().sum::<u64>(), period as u64);
        prop_assert_eq!(predict(&s), argmax_first(&s.counts));
    }

    /// Smoothed scores are 1/(2λ)-Lipschitz in ℓ1 under both joint laws.
    #[test]
    fn lipschitz_on_random_tables((q, period, vseed, tseed) in small_instance()) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, vseed, 2, q, period).unwrap();
        let table = TableClassifier::random(2, q, period, 2, tseed).unwrap();
        for joint in [Joint::Correlated, Joint::Independent] {
            let rep = oracle::verify_lipschitz_grid(&table, &spec, joint, &Budget::default()).unwrap();
            prop_assert!(rep.max_ratio <= Rational::one(), "{:?}", rep);
        }
    }

    /// Every exact certificate holds on the whole grid.
    #[test]
    fn certificates_hold((q, period, vseed, tseed) in small_instance(), classes in 2usize..5) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, vseed, 2, q, period).unwrap();
        let table = TableClassifier::random(2, q, period, classes, tseed).unwrap();
        for rule in [GapRule::MultiClass, GapRule::OneVsAll] {
            let rep = oracle::verify_prediction_stability(&table, &spec, rule, &Budget::default()).unwrap();
            prop_assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        }
    }

    /// The one-vs-all radius never exceeds the multiclass radius.
    #[test]
    fn one_vs_all_is_more_conservative((q, period, vseed, tseed) in small_instance(), lv in prop::collection::vec(0u32..=4, 2)) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, vseed, 2, q, period).unwrap();
        let table = TableClassifier::random(2, q, period, 4, tseed).unwrap();
        let x = QuantizedPoint::new(lv.iter().map(|&v| v.min(q)).collect(), q).unwrap();
        let radius = |rule| match certify_dssn(&table, &x, &spec, rule).unwrap().radius {
            Some(Radius::Exact(r)) => r,
            other => panic!("{other:?}"),
        };
        let (m, o) = (radius(GapRule::MultiClass), radius(GapRule::OneVsAll));
        prop_assert!(o <= m);
        prop_assert!(o >= Rational::zero());
    }

    /// Noisy outputs always land on the `1/(4q)` grid, and the integer path
    /// agrees with the rational transform.
    #[test]
    fn integer_and_rational_transforms_agree((q, period, vseed, _t) in small_instance(), base in 0u32..64, lv in prop::collection::vec(0u32..=4, 3)) {
        let spec = SplitSpec::generate(GENERATOR_MT19937, vseed, 3, q, period).unwrap();
        let x = QuantizedPoint::new(lv.iter().map(|&v| v.min(q)).collect(), q).unwrap();
        let s = splits_from_base(base % period, &spec).unwrap();
        let fast = quantized_noisy(&x, &s, period);
        let lambda = spec.lambda();
        for (i, &f) in fast.iter().enumerate() {
            let want = split_coord_general(x.value(i), split_value(s.idx[i], q), lambda);
            prop_assert_eq!(Rational::new(f as i64, 4 * q as i64), want);
        }
        if period >= q {
            let xs: Vec<Rational> = (0..3).map(|i| x.value(i)).collect();
            let simple = split_transform_simple(&xs, &s.values(q), lambda).unwrap();
            for (got, &f) in simple.iter().zip(&fast) {
                prop_assert_eq!(*got, Rational::new(f as i64, 4 * q as i64));
            }
        }
    }
}
