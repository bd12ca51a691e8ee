//! Property tests for the poset, linear-extension, allocation and estimator
//! invariants.

use proptest::prelude::*;

use porss::designs::{
    allocate_proportional, build_mvsr, build_rpor, draw_stratified_sample, Allocation,
    DesignConfig, DesignKind,
};
use porss::estimators::{estimate_mvsr, estimate_rpor};
use porss::linext::{
    count_extensions, enumerate_extensions, mean_heights, Enumeration, HeightMode,
};
use porss::poset::{
    build_poset, compare, suggest_sign_flips, ElementVector, SetOfElements, SignFlipMask,
    VectorOrdering,
};

fn rows_strategy(
    m: std::ops::RangeInclusive<usize>,
    r: usize,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, r..=r), m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compare_is_antisymmetric(a in prop::collection::vec(-5.0f64..5.0, 1..4),
                                b_seed in prop::collection::vec(-5.0f64..5.0, 1..4)) {
        let r = a.len().min(b_seed.len());
        let av = ElementVector::new(a[..r].to_vec()).unwrap();
        let bv = ElementVector::new(b_seed[..r].to_vec()).unwrap();
        let fwd = compare(&av, &bv).unwrap();
        let rev = compare(&bv, &av).unwrap();
        let mirrored = match fwd {
            VectorOrdering::Below => VectorOrdering::Above,
            VectorOrdering::Above => VectorOrdering::Below,
            other => other,
        };
        prop_assert_eq!(rev, mirrored);
    }

    #[test]
    fn poset_is_transitive_and_antisymmetric(rows in rows_strategy(2..=12, 2)) {
        let set = SetOfElements::from_rows(rows).unwrap();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        let n = poset.len();
        for i in 0..n {
            prop_assert!(!poset.is_below(i, i));
            for j in 0..n {
                prop_assert!(!(poset.is_below(i, j) && poset.is_below(j, i)));
                for k in 0..n {
                    if poset.is_below(i, j) && poset.is_below(j, k) {
                        prop_assert!(poset.is_below(i, k));
                    }
                }
            }
        }
        // Every cover edge is a relation pair with no intermediate element.
        for &(i, j) in poset.cover_edges() {
            prop_assert!(poset.is_below(i, j));
            for k in 0..n {
                prop_assert!(!(poset.is_below(i, k) && poset.is_below(k, j)));
            }
        }
    }

    #[test]
    fn flipping_every_variable_transposes_the_relation(rows in rows_strategy(2..=8, 2)) {
        // Continuous draws make exact ties essentially impossible, which the
        // transpose law requires.
        let set = SetOfElements::from_rows(rows).unwrap();
        let plain = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        let flipped = build_poset(&set, &SignFlipMask::new(vec![true, true])).unwrap();
        for i in 0..set.len() {
            for j in 0..set.len() {
                prop_assert_eq!(plain.is_below(i, j), flipped.is_below(j, i));
            }
        }
    }

    #[test]
    fn suggested_flips_never_lose_nonnegative_pairs(entries in prop::collection::vec(-1.0f64..1.0, 6)) {
        // Build a symmetric 4x4 pseudo-correlation matrix from 6 entries.
        let r = 4;
        let mut corr = vec![vec![0.0; r]; r];
        let mut it = entries.into_iter();
        for i in 0..r {
            corr[i][i] = 1.0;
            for j in (i + 1)..r {
                let v = it.next().unwrap();
                corr[i][j] = v;
                corr[j][i] = v;
            }
        }
        let count = |flips: &[bool]| -> usize {
            let mut c = 0;
            for i in 0..r {
                for j in (i + 1)..r {
                    let sign = if flips[i] != flips[j] { -1.0 } else { 1.0 };
                    if sign * corr[i][j] >= 0.0 {
                        c += 1;
                    }
                }
            }
            c
        };
        let mask = suggest_sign_flips(&corr).unwrap();
        prop_assert!(!mask.flips()[0], "canonical masks leave variable 0 alone");
        prop_assert!(count(mask.flips()) >= count(&[false; 4]));
    }

    #[test]
    fn count_equals_enumeration_and_heights_are_order_preserving(rows in rows_strategy(2..=6, 2)) {
        let set = SetOfElements::from_rows(rows).unwrap();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        let count = count_extensions(&poset).unwrap();
        let Enumeration::Complete(les) = enumerate_extensions(&poset, 100_000).unwrap() else {
            panic!()
        };
        prop_assert_eq!(count, les.len() as u64);
        let summary = mean_heights(&poset, HeightMode::Exact).unwrap();
        let m = poset.len();
        let total: f64 = summary.mean_height.iter().sum();
        prop_assert!((total - (m * (m + 1)) as f64 / 2.0).abs() < 1e-9);
        for (i, j) in poset.relation_pairs() {
            prop_assert!(summary.mean_height[i] < summary.mean_height[j]);
            prop_assert!(summary.rounded_height[i] <= summary.rounded_height[j]);
        }
    }

    #[test]
    fn allocation_invariants_hold_for_fuzzed_inputs(
        sizes in prop::collection::vec(0usize..9, 1..7),
        extra in 0usize..20,
    ) {
        let available: usize = sizes.iter().sum();
        let nonempty = sizes.iter().filter(|&&s| s > 0).count();
        prop_assume!(available > 0);
        let total = (nonempty + extra % (available - nonempty + 1)).min(available);
        prop_assume!(total >= nonempty && total >= 1);
        let alloc = allocate_proportional(&sizes, total).unwrap();
        prop_assert_eq!(alloc.total(), total);
        for (h, (&n_h, &k_h)) in alloc.per_stratum.iter().zip(&sizes).enumerate() {
            prop_assert!(n_h <= k_h, "stratum {h}");
            prop_assert_eq!(n_h == 0, k_h == 0);
        }
    }

    #[test]
    fn estimators_are_location_scale_equivariant(
        values in prop::collection::vec(-10.0f64..10.0, 12..=12),
        shift in -5.0f64..5.0,
        scale in 0.25f64..4.0,
    ) {
        // Fixed m=2, K=3, n=2 table built from the fuzzed values.
        let make_pop = |vals: &[f64], design| porss::designs::StratifiedPopulation {
            design,
            strata: vec![
                vals[..3]
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| porss::designs::RankedRecord {
                        ranking_values: ElementVector::new(vec![v]).unwrap(),
                        target_values: ElementVector::new(vec![v]).unwrap(),
                        set_index: i + 1,
                        stratum: 1,
                        mean_height: None,
                    })
                    .collect(),
                vals[3..6]
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| porss::designs::RankedRecord {
                        ranking_values: ElementVector::new(vec![v]).unwrap(),
                        target_values: ElementVector::new(vec![v]).unwrap(),
                        set_index: i + 1,
                        stratum: 2,
                        mean_height: None,
                    })
                    .collect(),
            ],
            replications: 3,
            ranking_columns: vec![0],
            target_columns: vec![0],
        };
        let transform = |vals: &[f64]| -> Vec<f64> {
            vals.iter().map(|v| scale * v + shift).collect()
        };
        let pop = make_pop(&values[..6], DesignKind::Mvsr);
        let pop_t = make_pop(&transform(&values[..6]), DesignKind::Mvsr);
        let samples: Vec<Vec<_>> = pop.strata.iter().map(|s| s[..2].to_vec()).collect();
        let samples_t: Vec<Vec<_>> = pop_t.strata.iter().map(|s| s[..2].to_vec()).collect();
        let a = estimate_mvsr(&pop, &samples).unwrap();
        let b = estimate_mvsr(&pop_t, &samples_t).unwrap();
        let (mu, var) = (a.estimates[0].mu_hat, a.estimates[0].var_hat.unwrap());
        let (mu_t, var_t) = (b.estimates[0].mu_hat, b.estimates[0].var_hat.unwrap());
        prop_assert!((mu_t - (scale * mu + shift)).abs() < 1e-9);
        prop_assert!((var_t - scale * scale * var).abs() < 1e-9);
        // Point estimates stay inside the sampled range.
        let drawn: Vec<f64> = samples.iter().flatten().map(|r| r.target_values[0]).collect();
        let (lo, hi) = drawn
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        prop_assert!(mu >= lo - 1e-12 && mu <= hi + 1e-12);
    }
}

#[test]
fn identical_seed_gives_bit_identical_populations_and_samples() {
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|i| vec![(i * 7 % 5) as f64, (i * 3 % 4) as f64])
        .collect();
    let set = SetOfElements::from_rows(rows).unwrap();
    let sets = vec![set.clone(), set.clone(), set];
    for design in [DesignKind::Mvsr, DesignKind::Rpor] {
        let cfg = DesignConfig {
            m: 5,
            replications: 3,
            per_stratum_n: 2,
            design,
            ranking_columns: if design == DesignKind::Mvsr {
                vec![0]
            } else {
                vec![0, 1]
            },
            target_columns: vec![0, 1],
            sign_flips: SignFlipMask::none(2),
            seed: 777,
        };
        let build = |cfg: &DesignConfig| match design {
            DesignKind::Mvsr => build_mvsr(&sets, cfg).unwrap(),
            DesignKind::Rpor => build_rpor(&sets, cfg).unwrap(),
            DesignKind::Cpor => unreachable!(),
        };
        let pop_a = build(&cfg);
        let pop_b = build(&cfg);
        assert_eq!(pop_a, pop_b);
        let alloc = Allocation::uniform(5, 2);
        let sample_a = draw_stratified_sample(&pop_a, &alloc, 123).unwrap();
        let sample_b = draw_stratified_sample(&pop_b, &alloc, 123).unwrap();
        assert_eq!(sample_a, sample_b);
        let mut other_seed = cfg.clone();
        other_seed.seed = 778;
        if design == DesignKind::Rpor {
            // A different seed should (almost surely) change something.
            let pop_c = build(&other_seed);
            assert_ne!(pop_a, pop_c);
        }
    }
}

#[test]
fn rpor_and_mvsr_reports_flag_design_mismatch() {
    let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, i as f64]).collect();
    let set = SetOfElements::from_rows(rows).unwrap();
    let sets = vec![set.clone(), set];
    let cfg = DesignConfig {
        m: 4,
        replications: 2,
        per_stratum_n: 1,
        design: DesignKind::Rpor,
        ranking_columns: vec![0, 1],
        target_columns: vec![0],
        sign_flips: SignFlipMask::none(2),
        seed: 5,
    };
    let pop = build_rpor(&sets, &cfg).unwrap();
    let alloc = Allocation::uniform(4, 1);
    let samples = draw_stratified_sample(&pop, &alloc, 6).unwrap();
    assert!(estimate_mvsr(&pop, &samples).is_err());
    assert!(estimate_rpor(&pop, &samples).is_ok());
}
