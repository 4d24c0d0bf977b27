//! Forecast skill metrics and model comparison reports.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridding::{BinIndex, BinSeriesSet};
use crate::models::ForecastStream;
use crate::textio;

fn check_pair(observed: &[f64], predicted: &[f64], min_len: usize) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observations vs {} predictions",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.len() < min_len {
        return Err(Error::InvalidArgument(format!("need at least {min_len} pairs")));
    }
    Ok(())
}

/// Nash-Sutcliffe efficiency `1 − Σ(O−P)² / Σ(O−Ō)²`.
///
/// A constant observed series has no variance to explain and is reported as
/// [`Error::Degenerate`].
pub fn nse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted, 2)?;
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let variance: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    if variance == 0.0 {
        return Err(Error::Degenerate("observed series is constant".into()));
    }
    let residual: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - residual / variance)
}

/// `1 / (2 − NSE)`, mapping NSE ∈ (−∞, 1] onto (0, 1].
pub fn nnse(nse: f64) -> f64 {
    1.0 / (2.0 - nse)
}

pub fn mse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted, 1)?;
    let total: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(total / observed.len() as f64)
}

pub fn mae(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted, 1)?;
    let total: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).abs()).sum();
    Ok(total / observed.len() as f64)
}

/// How the headline NSE/NNSE is aggregated across bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One NSE over every (bin, period) pair.
    #[default]
    Pooled,
    /// Mean of per-bin NSE and NNSE over non-degenerate bins.
    BinAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub bin: BinIndex,
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    /// `None` for a degenerate (constant observed) bin.
    pub nse: Option<f64>,
    pub nnse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub aggregation: Aggregation,
    pub n_pairs: usize,
    pub mse: f64,
    pub mae: f64,
    pub nse: f64,
    pub nnse: f64,
    /// Bins left out of NSE/NNSE because their observed series is constant.
    pub degenerate_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub split: String,
    pub aggregate: AggregateMetrics,
    pub per_bin: Vec<BinMetrics>,
}

/// Score one stream against `truth` over `periods`, bins in `truth` order.
pub fn evaluate_stream(
    stream: &ForecastStream,
    truth: &BinSeriesSet,
    periods: Range<usize>,
    split: &str,
    aggregation: Aggregation,
) -> Result<MetricReport> {
    if periods.is_empty() || periods.end > truth.n_periods() {
        return Err(Error::InvalidArgument(format!(
            "periods {periods:?} are not inside the {} observed periods",
            truth.n_periods()
        )));
    }
    stream.require_coverage(&truth.active_bins, periods.clone())?;

    let mut all_obs = Vec::with_capacity(truth.n_bins() * periods.len());
    let mut all_pred = Vec::with_capacity(all_obs.capacity());
    let mut per_bin = Vec::with_capacity(truth.n_bins());
    for (row, &bin) in truth.active_bins.iter().enumerate() {
        let obs = &truth.values[row][periods.clone()];
        let pred: Vec<f64> = periods
            .clone()
            .map(|t| stream.get(bin, t).expect("coverage checked"))
            .collect();
        let bin_nse = match nse(obs, &pred) {
            Ok(v) => Some(v),
            Err(Error::Degenerate(_)) | Err(Error::InvalidArgument(_)) => None,
            Err(e) => return Err(e),
        };
        per_bin.push(BinMetrics {
            bin,
            n: obs.len(),
            mse: mse(obs, &pred)?,
            mae: mae(obs, &pred)?,
            nse: bin_nse,
            nnse: bin_nse.map(nnse),
        });
        all_obs.extend_from_slice(obs);
        all_pred.extend(pred);
    }

    let degenerate_bins = per_bin.iter().filter(|b| b.nse.is_none()).count();
    let (agg_nse, agg_nnse) = match aggregation {
        Aggregation::Pooled => {
            let v = nse(&all_obs, &all_pred)?;
            (v, nnse(v))
        }
        Aggregation::BinAveraged => {
            let scored: Vec<&BinMetrics> = per_bin.iter().filter(|b| b.nse.is_some()).collect();
            if scored.is_empty() {
                return Err(Error::Degenerate("every bin has a constant observed series".into()));
            }
            let k = scored.len() as f64;
            (
                scored.iter().filter_map(|b| b.nse).sum::<f64>() / k,
                scored.iter().filter_map(|b| b.nnse).sum::<f64>() / k,
            )
        }
    };
    Ok(MetricReport {
        model: stream.model.clone(),
        split: split.to_string(),
        aggregate: AggregateMetrics {
            aggregation,
            n_pairs: all_obs.len(),
            mse: mse(&all_obs, &all_pred)?,
            mae: mae(&all_obs, &all_pred)?,
            nse: agg_nse,
            nnse: agg_nnse,
            degenerate_bins,
        },
        per_bin,
    })
}

/// One report per stream, ranked by MSE descending (best model last), ties by name.
pub fn report(
    streams: &[ForecastStream],
    truth: &BinSeriesSet,
    periods: Range<usize>,
    split: &str,
    aggregation: Aggregation,
) -> Result<Vec<MetricReport>> {
    let mut gaps = Vec::new();
    for s in streams {
        if let Err(Error::CoverageGaps(g)) = s.require_coverage(&truth.active_bins, periods.clone()) {
            gaps.extend(g);
        }
    }
    if !gaps.is_empty() {
        gaps.sort_unstable_by_key(|&(b, t)| (t, b));
        gaps.dedup();
        return Err(Error::CoverageGaps(gaps));
    }
    let mut reports = streams
        .iter()
        .map(|s| evaluate_stream(s, truth, periods.clone(), split, aggregation))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| {
        b.aggregate
            .mse
            .total_cmp(&a.aggregate.mse)
            .then_with(|| a.model.cmp(&b.model))
    });
    Ok(reports)
}

/// `model,mse,mae,nnse` rows in report order.
pub fn table_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("model,mse,mae,nnse\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.model,
            textio::fmt_f64(r.aggregate.mse),
            textio::fmt_f64(r.aggregate.mae),
            textio::fmt_f64(r.aggregate.nnse)
        ));
    }
    out
}

pub fn detail_json(reports: &[MetricReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)? + "\n")
}

/// Truth-versus-prediction rows for plotting: `model,bin_index,period_index,observed,predicted`.
pub fn series_csv(streams: &[ForecastStream], truth: &BinSeriesSet, periods: Range<usize>) -> Result<String> {
    let mut out = String::from("model,bin_index,period_index,observed,predicted\n");
    for s in streams {
        s.require_coverage(&truth.active_bins, periods.clone())?;
        for (row, &bin) in truth.active_bins.iter().enumerate() {
            for t in periods.clone() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.model,
                    bin,
                    t,
                    textio::fmt_f64(truth.values[row][t]),
                    textio::fmt_f64(s.get(bin, t).expect("coverage checked"))
                ));
            }
        }
    }
    Ok(out)
}
