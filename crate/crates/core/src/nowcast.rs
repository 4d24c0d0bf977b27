//! Two-parameter nowcast filter on the monthly rate of small earthquakes,
//! scored by ROC skill against the occurrence of large events.

use chrono::{DateTime, Datelike, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEvent;
use crate::error::{Error, Result};
use crate::features::ema;

pub const CORRECTION_CLAMP: (f64, f64) = (0.1, 10.0);

/// Consecutive calendar months starting at `(start_year, start_month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthSpan {
    pub start_year: i32,
    /// 1-based.
    pub start_month: u32,
    pub n_months: usize,
}

impl MonthSpan {
    /// Months from the one containing `start` through the one before `end`'s
    /// month (or `end`'s month itself if `end` is not a month boundary).
    pub fn covering(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        let first = month_number(start);
        let mut last = month_number(end);
        let at_boundary = end.day() == 1 && end.time() == chrono::NaiveTime::MIN;
        if !at_boundary {
            last += 1;
        }
        if last <= first {
            return Err(Error::InvalidArgument("month span is empty".into()));
        }
        Ok(MonthSpan {
            start_year: start.year(),
            start_month: start.month(),
            n_months: (last - first) as usize,
        })
    }

    pub fn month_of(&self, time: DateTime<Utc>) -> Option<usize> {
        let offset = month_number(time) - (i64::from(self.start_year) * 12 + i64::from(self.start_month) - 1);
        usize::try_from(offset).ok().filter(|&m| m < self.n_months)
    }
}

fn month_number(t: DateTime<Utc>) -> i64 {
    i64::from(t.year()) * 12 + i64::from(t.month()) - 1
}

/// Monthly count of events with magnitude strictly above `threshold`.
pub fn monthly_small_rate(events: &[CatalogEvent], span: &MonthSpan, threshold: f64) -> Vec<f64> {
    let mut rate = vec![0.0; span.n_months];
    for e in events {
        if e.magnitude > threshold {
            if let Some(m) = span.month_of(e.time) {
                rate[m] += 1.0;
            }
        }
    }
    rate
}

/// `labels[t]` is true when an event of magnitude `≥ large_mag` occurs in
/// months `t+1 ..= t+horizon`.
pub fn large_event_labels(events: &[CatalogEvent], span: &MonthSpan, large_mag: f64, horizon: usize) -> Vec<bool> {
    let mut has_large = vec![false; span.n_months];
    for e in events {
        if e.magnitude >= large_mag {
            if let Some(m) = span.month_of(e.time) {
                has_large[m] = true;
            }
        }
    }
    (0..span.n_months)
        .map(|t| (t + 1..=(t + horizon).min(span.n_months.saturating_sub(1))).any(|m| has_large[m]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NowcastFilterParams {
    /// EMA span in months.
    pub ema_span: usize,
    /// Exponent λ ∈ [0, 1] on the rate correction; 0 disables it.
    pub correction_weight: f64,
}

impl NowcastFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.ema_span < 1 {
            return Err(Error::InvalidArgument("EMA span must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.correction_weight) {
            return Err(Error::InvalidArgument(format!(
                "correction weight {} outside [0, 1]",
                self.correction_weight
            )));
        }
        Ok(())
    }
}

/// `n[t] = EMA(rate)[t] · c(t)^λ` with `c(t)` the ratio of the mean rate over
/// the first `training_len` months to the mean over the `ema_span` months
/// ending at `t`, clamped to [`CORRECTION_CLAMP`]. A zero trailing mean takes
/// the upper clamp.
pub fn nowcast_curve(rate: &[f64], params: &NowcastFilterParams, training_len: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if rate.len() <= params.ema_span {
        return Err(Error::InvalidArgument(format!(
            "rate series of {} months is not longer than the EMA span {}",
            rate.len(),
            params.ema_span
        )));
    }
    if training_len == 0 || training_len > rate.len() {
        return Err(Error::InvalidArgument(format!("training span {training_len} out of range")));
    }
    let smoothed = ema(rate, params.ema_span)?;
    if params.correction_weight == 0.0 {
        return Ok(smoothed);
    }

    let global_mean = rate[..training_len].iter().sum::<f64>() / training_len as f64;
    let mut prefix = vec![0.0; rate.len() + 1];
    for (i, r) in rate.iter().enumerate() {
        prefix[i + 1] = prefix[i] + r;
    }
    let (lo, hi) = CORRECTION_CLAMP;
    Ok(smoothed
        .iter()
        .enumerate()
        .map(|(t, &s)| {
            let start = (t + 1).saturating_sub(params.ema_span);
            let trailing = (prefix[t + 1] - prefix[start]) / (t + 1 - start) as f64;
            let c = if trailing > 0.0 { (global_mean / trailing).clamp(lo, hi) } else { hi };
            s * c.powf(params.correction_weight)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending; the first entry is `+∞` (no alarms).
    pub thresholds: Vec<f64>,
    pub true_positive_rates: Vec<f64>,
    pub false_positive_rates: Vec<f64>,
    /// Trapezoidal area under the curve.
    pub skill: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,false_positive_rate,true_positive_rate\n");
        for i in 0..self.thresholds.len() {
            out.push_str(&format!(
                "{:?},{:?},{:?}\n",
                self.thresholds[i], self.false_positive_rates[i], self.true_positive_rates[i]
            ));
        }
        out
    }
}

/// Sweep the alarm threshold over every distinct nowcast value; a month is in
/// alarm when its nowcast is at or above the threshold.
pub fn roc_skill(nowcast: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if nowcast.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} nowcast values vs {} labels",
            nowcast.len(),
            labels.len()
        )));
    }
    if let Some(bad) = nowcast.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite nowcast value {bad}")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedSkill(format!(
            "{positives} positive and {negatives} negative months"
        )));
    }

    let mut order: Vec<usize> = (0..nowcast.len()).collect();
    order.sort_by(|&a, &b| nowcast[b].total_cmp(&nowcast[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in order.chunk_by(|&a, &b| nowcast[a] == nowcast[b]) {
        for &i in group {
            if labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        thresholds.push(nowcast[group[0]]);
        tpr.push(tp as f64 / positives as f64);
        fpr.push(fp as f64 / negatives as f64);
    }
    let skill = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) / 2.0)
        .sum();
    Ok(RocCurve {
        thresholds,
        true_positive_rates: tpr,
        false_positive_rates: fpr,
        skill,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterGrid {
    pub ema_spans: Vec<usize>,
    pub correction_weights: Vec<f64>,
}

impl Default for FilterGrid {
    fn default() -> Self {
        FilterGrid {
            ema_spans: vec![6, 12, 18, 24, 30, 36, 42, 48, 60],
            correction_weights: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillPoint {
    pub params: NowcastFilterParams,
    pub skill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOptimum {
    pub best: NowcastFilterParams,
    pub skill: f64,
    /// Every grid point, spans ascending then weights ascending.
    pub surface: Vec<SkillPoint>,
}

impl FilterOptimum {
    pub fn surface_csv(&self) -> String {
        let mut out = String::from("ema_span,correction_weight,skill\n");
        for p in &self.surface {
            out.push_str(&format!("{},{:?},{:?}\n", p.params.ema_span, p.params.correction_weight, p.skill));
        }
        out
    }
}

/// Exhaustive grid search maximizing ROC skill over the first `training_len`
/// months. Ties go to the smaller span, then the smaller weight.
pub fn optimize_filter(rate: &[f64], labels: &[bool], grid: &FilterGrid, training_len: usize) -> Result<FilterOptimum> {
    if rate.len() != labels.len() {
        return Err(Error::ShapeMismatch("rate and label series differ in length".into()));
    }
    let mut spans = grid.ema_spans.clone();
    spans.sort_unstable();
    spans.dedup();
    let mut weights = grid.correction_weights.clone();
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    let points: Vec<NowcastFilterParams> = spans
        .iter()
        .flat_map(|&ema_span| {
            weights.iter().map(move |&correction_weight| NowcastFilterParams {
                ema_span,
                correction_weight,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::InvalidArgument("parameter grid is empty".into()));
    }

    let surface = points
        .par_iter()
        .map(|params| {
            let curve = nowcast_curve(rate, params, training_len)?;
            let roc = roc_skill(&curve[..training_len], &labels[..training_len])?;
            Ok(SkillPoint {
                params: *params,
                skill: roc.skill,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = surface[0];
    for p in &surface[1..] {
        if p.skill > best.skill {
            best = *p;
        }
    }
    Ok(FilterOptimum {
        best: best.params,
        skill: best.skill,
        surface,
    })
}
