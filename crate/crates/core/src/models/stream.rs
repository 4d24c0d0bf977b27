//! Per-(bin, period) forecast streams and their CSV exchange format.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gridding::{BinIndex, BinSeriesSet};
use crate::textio;

pub const STREAM_HEADER: &str = "model,bin_index,period_index,value";

/// Beyond this many missing pairs a file is rejected as malformed rather than
/// reported gap by gap.
const MAX_LISTED_GAPS: usize = 1_000_000;

/// Forecasts for every bin in `bins` and every period in `periods`.
///
/// Bins are kept sorted ascending; `values` is laid out `[period][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastStream {
    pub model: String,
    bins: Vec<BinIndex>,
    periods: Range<usize>,
    values: Vec<f64>,
}

impl ForecastStream {
    /// `values[p · bins.len() + i]` is the forecast for `bins[i]` at `periods.start + p`.
    pub fn new(model: impl Into<String>, bins: Vec<BinIndex>, periods: Range<usize>, values: Vec<f64>) -> Result<Self> {
        let model = model.into();
        validate_name(&model)?;
        let n = bins.len();
        if values.len() != n * periods.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n} bins × {} periods",
                values.len(),
                periods.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("stream `{model}` has non-finite forecasts")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| bins[i]);
        let sorted: Vec<BinIndex> = order.iter().map(|&i| bins[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("stream `{model}` repeats a bin")));
        }
        let mut permuted = Vec::with_capacity(values.len());
        for p in 0..periods.len() {
            permuted.extend(order.iter().map(|&i| values[p * n + i]));
        }
        Ok(ForecastStream {
            model,
            bins: sorted,
            periods,
            values: permuted,
        })
    }

    /// The observed series replayed as a stream.
    pub fn truth(model: impl Into<String>, set: &BinSeriesSet, periods: Range<usize>) -> Result<Self> {
        if periods.end > set.n_periods() {
            return Err(Error::InvalidArgument("periods exceed the series".into()));
        }
        let mut values = Vec::with_capacity(set.n_bins() * periods.len());
        for t in periods.clone() {
            values.extend(set.values.iter().map(|row| row[t]));
        }
        Self::new(model, set.active_bins.clone(), periods, values)
    }

    pub fn bins(&self) -> &[BinIndex] {
        &self.bins
    }

    pub fn periods(&self) -> Range<usize> {
        self.periods.clone()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, bin: BinIndex, period: usize) -> Option<f64> {
        if !self.periods.contains(&period) {
            return None;
        }
        let i = self.bins.binary_search(&bin).ok()?;
        Some(self.values[(period - self.periods.start) * self.bins.len() + i])
    }

    /// Error listing every `(bin, period)` pair in the request that this stream lacks.
    pub fn require_coverage(&self, bins: &[BinIndex], periods: Range<usize>) -> Result<()> {
        let mut gaps = Vec::new();
        for t in periods {
            for &b in bins {
                if self.get(b, t).is_none() {
                    gaps.push((b.0, t));
                }
            }
        }
        if gaps.is_empty() {
            Ok(())
        } else {
            Err(Error::CoverageGaps(gaps))
        }
    }

    /// Rows ordered by period, then bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.values.len() + STREAM_HEADER.len() + 1);
        out.push_str(STREAM_HEADER);
        out.push('\n');
        for (p, t) in self.periods.clone().enumerate() {
            for (i, b) in self.bins.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.model,
                    b,
                    t,
                    textio::fmt_f64(self.values[p * self.bins.len() + i])
                ));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write(path, self.to_csv())
    }
}

fn validate_name(model: &str) -> Result<()> {
    if model.is_empty() || model.contains([',', '\n', '\r', '"']) || model.trim() != model {
        return Err(Error::InvalidArgument(format!("invalid model name `{model}`")));
    }
    Ok(())
}

/// Parse one stream file. A file may hold several models; each must form a
/// complete bins × periods rectangle with no duplicate rows.
pub fn parse_streams(text: &str) -> Result<Vec<ForecastStream>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().trim_start_matches('\u{feff}') == STREAM_HEADER => {}
        _ => return Err(Error::Parse(format!("stream file must start with `{STREAM_HEADER}`"))),
    }
    let mut by_model: BTreeMap<String, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("line {}: malformed row `{line}`", lineno + 1));
        if fields.len() != 4 {
            return Err(bad());
        }
        let bin: usize = fields[1].parse().map_err(|_| bad())?;
        let period: usize = fields[2].parse().map_err(|_| bad())?;
        let value: f64 = fields[3].parse().map_err(|_| bad())?;
        if !value.is_finite() {
            return Err(Error::Parse(format!("line {}: non-finite forecast", lineno + 1)));
        }
        validate_name(fields[0]).map_err(|_| bad())?;
        let rows = by_model.entry(fields[0].to_string()).or_default();
        if rows.insert((period, bin), value).is_some() {
            return Err(Error::Parse(format!(
                "line {}: duplicate forecast for model `{}`, bin {bin}, period {period}",
                lineno + 1,
                fields[0]
            )));
        }
    }

    let mut streams = Vec::with_capacity(by_model.len());
    for (model, rows) in by_model {
        let mut bins: Vec<usize> = rows.keys().map(|&(_, b)| b).collect();
        bins.sort_unstable();
        bins.dedup();
        let first = rows.keys().next().map_or(0, |k| k.0);
        let last = rows.keys().next_back().map_or(0, |k| k.0);
        let end = last.checked_add(1).ok_or_else(|| Error::Parse("period index overflows".into()))?;
        let periods = first..end;
        let expected = bins.len().checked_mul(periods.len());
        if expected.is_none_or(|e| e > rows.len().saturating_add(MAX_LISTED_GAPS)) {
            return Err(Error::Parse(format!("stream `{model}` is too sparse to be a bins × periods table")));
        }
        if expected != Some(rows.len()) {
            let mut gaps = Vec::new();
            for t in periods.clone() {
                for &b in &bins {
                    if !rows.contains_key(&(t, b)) {
                        gaps.push((b, t));
                    }
                }
            }
            return Err(Error::CoverageGaps(gaps));
        }
        let values: Vec<f64> = rows.into_values().collect();
        streams.push(ForecastStream::new(model, bins.into_iter().map(BinIndex).collect(), periods, values)?);
    }
    Ok(streams)
}

/// Load every stream from `paths`; model names must be unique across files.
pub fn load_forecast_streams<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<ForecastStream>> {
    let mut out: Vec<ForecastStream> = Vec::new();
    for path in paths {
        for stream in parse_streams(&textio::read_to_string(path.as_ref())?)? {
            if out.iter().any(|s| s.model == stream.model) {
                return Err(Error::InvalidArgument(format!("stream `{}` appears twice", stream.model)));
            }
            out.push(stream);
        }
    }
    Ok(out)
}
