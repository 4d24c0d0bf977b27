use proptest::prelude::*;
use quakecast::evaluation::{detail_json, mae, mse, nnse, nse, report, series_csv, table_csv, Aggregation};
use quakecast::gridding::BinIndex;
use quakecast::models::ForecastStream;
use quakecast::synthetic::panel_series_set;
use quakecast::Error;

fn stream(name: &str, rows: &[Vec<f64>], periods: std::ops::Range<usize>) -> ForecastStream {
    let bins: Vec<BinIndex> = (0..rows.len()).map(BinIndex).collect();
    let mut values = Vec::new();
    for t in periods.clone() {
        for row in rows {
            values.push(row[t]);
        }
    }
    ForecastStream::new(name, bins, periods, values).unwrap()
}

#[test]
fn reports_rank_worst_first_and_flag_constant_bins() {
    let truth_rows = vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 6], vec![5.0, 3.0, 4.0, 1.0, 0.0, 2.0]];
    let truth = panel_series_set(truth_rows.clone()).unwrap();
    let shifted: Vec<Vec<f64>> = truth_rows.iter().map(|r| r.iter().map(|v| v + 0.5).collect()).collect();
    let flat: Vec<Vec<f64>> = truth_rows.iter().map(|r| vec![r.iter().sum::<f64>() / 6.0; 6]).collect();
    let streams = [
        stream("shifted", &shifted, 0..6),
        stream("exact", &truth_rows, 0..6),
        stream("flat", &flat, 2..6),
    ];

    let reports = report(&streams, &truth, 2..6, "test", Aggregation::BinAveraged).unwrap();
    let order: Vec<&str> = reports.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(order, ["flat", "shifted", "exact"]);
    let exact = &reports[2].aggregate;
    assert_eq!((exact.nse, exact.nnse, exact.mse, exact.degenerate_bins), (1.0, 1.0, 0.0, 1));
    assert!(reports[2].per_bin[1].nse.is_none());
    assert_eq!(reports[1].aggregate.mse, 0.25);
    assert_eq!(reports[1].aggregate.mae, 0.5);

    let pooled = report(&streams, &truth, 2..6, "test", Aggregation::Pooled).unwrap();
    assert_eq!(pooled[2].aggregate.nse, 1.0);
    assert_eq!(pooled[2].aggregate.n_pairs, 12);

    let table = table_csv(&reports);
    assert!(table.starts_with("model,mse,mae,nnse\nflat,"));
    assert_eq!(table.lines().count(), 4);
    let detail: serde_json::Value = serde_json::from_str(&detail_json(&reports).unwrap()).unwrap();
    assert_eq!(detail[2]["aggregate"]["aggregation"], "bin_averaged");
    assert_eq!(series_csv(&streams[1..2], &truth, 2..6).unwrap().lines().count(), 1 + 12);

    // the third stream only starts at period 2
    match report(&streams, &truth, 0..6, "all", Aggregation::Pooled) {
        Err(Error::CoverageGaps(gaps)) => assert_eq!(gaps.len(), 6),
        other => panic!("expected gaps, got {other:?}"),
    }
}

#[test]
fn all_constant_truth_is_degenerate() {
    let truth = panel_series_set(vec![vec![2.0; 4], vec![3.0; 4]]).unwrap();
    let s = stream("s", &[vec![2.0; 4], vec![3.0; 4]], 0..4);
    for aggregation in [Aggregation::Pooled, Aggregation::BinAveraged] {
        let result = report(std::slice::from_ref(&s), &panel_series_set(vec![vec![1.0; 4]; 2]).unwrap(), 0..4, "x", aggregation);
        assert!(matches!(result, Err(Error::Degenerate(_))));
    }
    // pooled NSE can still be defined when the bins differ from each other
    let pooled = report(&[s], &truth, 0..4, "x", Aggregation::Pooled).unwrap();
    assert_eq!(pooled[0].aggregate.nse, 1.0);
    assert_eq!(pooled[0].aggregate.degenerate_bins, 2);
}

fn varied() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..200)
        .prop_filter("needs variance", |v| v.iter().any(|x| *x != v[0]))
}

proptest! {
    #[test]
    fn mean_forecast_scores_zero(obs in varied()) {
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let score = nse(&obs, &vec![mean; obs.len()]).unwrap();
        prop_assert_eq!(score, 0.0);
        prop_assert_eq!(nnse(score), 0.5);
    }

    #[test]
    fn perfect_forecast_scores_one(obs in varied()) {
        let score = nse(&obs, &obs).unwrap();
        prop_assert_eq!(score, 1.0);
        prop_assert_eq!(nnse(score), 1.0);
        prop_assert_eq!(mse(&obs, &obs).unwrap(), 0.0);
        prop_assert_eq!(mae(&obs, &obs).unwrap(), 0.0);
    }

    #[test]
    fn nnse_is_bounded_and_monotone(obs in varied(), noise in prop::collection::vec(-5.0f64..5.0, 200)) {
        let pred: Vec<f64> = obs.iter().zip(&noise).map(|(o, n)| o + n).collect();
        let worse: Vec<f64> = obs.iter().zip(&noise).map(|(o, n)| o + 2.0 * n).collect();
        let a = nse(&obs, &pred).unwrap();
        let b = nse(&obs, &worse).unwrap();
        prop_assert!(a <= 1.0 && b <= a);
        prop_assert!(nnse(a) > 0.0 && nnse(a) <= 1.0 && nnse(b) <= nnse(a));
        prop_assert!(mse(&obs, &pred).unwrap() >= mae(&obs, &pred).unwrap().powi(2) * (1.0 - 1e-12));
    }
}
