mod common;

use common::{mini_set, multiplicity_scan, recursive_ema, weighted_ema};
use proptest::prelude::*;
use quakecast::features::{ema, make_windows, multiplicity, FeatureCube, FeatureSpec, SampleSet};

#[test]
fn multiplicity_matches_catalog_scan() {
    let (set, index) = mini_set();
    for threshold in [2.0, 2.5, 3.29] {
        for weeks in [2, 4, 8, 26, 130] {
            for row in 0..set.n_bins() {
                for t in 0..=set.n_periods() {
                    assert_eq!(
                        multiplicity(&index, row, t, weeks, threshold).unwrap(),
                        multiplicity_scan(&set, row, t, weeks, threshold),
                        "row {row} t {t} weeks {weeks} threshold {threshold}"
                    );
                }
            }
        }
    }
    assert!(multiplicity(&index, 0, 5, 1, 3.29).is_err());
    assert!(multiplicity(&index, 0, 5, 3, 3.29).is_err());
}

#[test]
fn cube_rows_hold_the_window_through_that_period() {
    let (set, index) = mini_set();
    let spec = FeatureSpec {
        use_multiplicity: true,
        multiplicity_threshold: 2.5,
        multiplicity_windows: vec![2, 6, 26],
        ..FeatureSpec::default()
    };
    let cube = FeatureCube::build(&set, Some(&index), &spec, None).unwrap();
    for row in 0..set.n_bins() {
        for t in 0..set.n_periods() {
            for (k, &weeks) in spec.multiplicity_windows.iter().enumerate() {
                let expected = multiplicity(&index, row, t + 1, weeks, 2.5).unwrap();
                assert_eq!(cube.row(row, t)[1 + k], f64::from(expected));
            }
        }
    }
}

#[test]
fn ema_matches_oracles_on_mini_series() {
    let (set, _) = mini_set();
    for row in 0..set.n_bins() {
        let x = &set.values[row];
        for span in [1, 2, 5, 10, 25, 75, 150] {
            let got = ema(x, span).unwrap();
            let rec = recursive_ema(x, span);
            for t in 0..x.len() {
                assert!((got[t] - rec[t]).abs() < 1e-12);
                assert!((got[t] - weighted_ema(x, span, t)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn sample_counts_and_slices() {
    let (set, index) = mini_set();
    let spec = FeatureSpec::default().with_multiplicity().with_ema();
    let spec = FeatureSpec {
        multiplicity_windows: vec![2, 4],
        ema_spans: vec![3, 6],
        ..spec
    };
    let (train, test) = make_windows(&set, Some(&index), &spec, 8, 48).unwrap();
    assert_eq!(train.len() + test.len(), set.n_bins() * (set.n_periods() - 8));
    assert_eq!((train.targets.clone(), test.targets.clone()), (8..48, 48..60));
    for s in train.iter().chain(test.iter()) {
        assert_eq!(s.target, set.values[s.bin_row][s.t_target]);
        for i in 0..s.lookback_len() {
            assert_eq!(s.lookback_row(i)[0], set.values[s.bin_row][s.t_target - 8 + i]);
        }
    }
    let (single, _) = make_windows(&set, None, &FeatureSpec::default(), 8, 48).unwrap();
    assert_eq!(single.n_features(), 1);
    assert!(make_windows(&set, None, &FeatureSpec::default(), 60, 48).is_err());
}

#[test]
fn samples_round_trip_through_disk() {
    let (set, index) = mini_set();
    let spec = FeatureSpec {
        use_multiplicity: true,
        multiplicity_windows: vec![2, 4],
        ..FeatureSpec::default()
    };
    let (train, test) = make_windows(&set, Some(&index), &spec, 6, 40).unwrap();
    let dir = tempfile::tempdir().unwrap();
    quakecast::features::save_samples(&train, &test, dir.path()).unwrap();
    let (tr, te): (SampleSet, SampleSet) = quakecast::features::load_samples(dir.path()).unwrap();
    assert_eq!(tr.cube, train.cube);
    assert_eq!((tr.targets, te.targets), (train.targets, test.targets));
}

proptest! {
    #[test]
    fn ema_is_shift_equivariant(x in prop::collection::vec(-3.0f64..3.0, 1..60), k in 0usize..10, span in 1usize..40) {
        let mut padded = vec![x[0]; k];
        padded.extend_from_slice(&x);
        let a = ema(&x, span).unwrap();
        let b = ema(&padded, span).unwrap();
        prop_assert!(b[..k].iter().all(|&v| (v - x[0]).abs() < 1e-12));
        for t in 0..x.len() {
            prop_assert!((a[t] - b[t + k]).abs() < 1e-12);
        }
    }

    #[test]
    fn ema_fixed_point_and_span_one(c in -5.0f64..5.0, n in 1usize..50, span in 1usize..100) {
        prop_assert!(ema(&vec![c; n], span).unwrap().iter().all(|&v| (v - c).abs() < 1e-12));
        let x: Vec<f64> = (0..n).map(|i| c + i as f64).collect();
        prop_assert_eq!(ema(&x, 1).unwrap(), x);
    }

    #[test]
    fn multiplicity_grows_with_window(row in 0usize..20, t in 0usize..61, threshold in 1.5f64..4.0) {
        let (_, index) = mini_set();
        let mut last = 0;
        for weeks in [2, 4, 8, 16, 52, 260] {
            let m = multiplicity(&index, row, t, weeks, threshold).unwrap();
            prop_assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn features_are_causal(row in 0usize..20, t in 1usize..59, bump in 0.1f64..1.0) {
        let (set, index) = mini_set();
        let spec = FeatureSpec {
            use_multiplicity: true,
            multiplicity_windows: vec![2, 4],
            use_ema: true,
            ema_spans: vec![2, 5],
            ..FeatureSpec::default()
        };
        let base = FeatureCube::build(&set, Some(&index), &spec, None).unwrap();
        let mut future = set.clone();
        for v in &mut future.values[row][t..] {
            *v += bump;
        }
        let mut idx = index.clone();
        idx.per_bin[row].push((t, 9.0));
        let changed = FeatureCube::build(&future, Some(&idx), &spec, None).unwrap();
        for p in 0..t {
            prop_assert_eq!(base.row(row, p), changed.row(row, p));
        }
    }
}
