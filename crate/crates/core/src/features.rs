//! Supervised windows and the Multiplicity / EMA features.
//!
//! Features live in a [`FeatureCube`] laid out `[bin][period][feature]`, so a
//! lookback window for one bin is a contiguous slice and windows never copy.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEvent;
use crate::error::{Error, Result};
use crate::gridding::{BinIndex, BinSeriesSet};
use crate::textio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub use_multiplicity: bool,
    pub multiplicity_threshold: f64,
    /// Trailing window lengths in weeks.
    pub multiplicity_windows: Vec<u32>,
    pub use_ema: bool,
    /// EMA spans in samples.
    pub ema_spans: Vec<usize>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            use_multiplicity: false,
            multiplicity_threshold: 3.29,
            multiplicity_windows: vec![2, 14, 52, 130, 260],
            use_ema: false,
            ema_spans: vec![5, 10, 25, 75, 150],
        }
    }
}

impl FeatureSpec {
    pub fn with_multiplicity(mut self) -> Self {
        self.use_multiplicity = true;
        self
    }

    pub fn with_ema(mut self) -> Self {
        self.use_ema = true;
        self
    }

    pub fn validate(&self, period_days: u32) -> Result<()> {
        let ascending = |v: &[u64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|&x| x > 0);
        let windows: Vec<u64> = self.multiplicity_windows.iter().map(|&w| u64::from(w)).collect();
        let spans: Vec<u64> = self.ema_spans.iter().map(|&s| s as u64).collect();
        if !ascending(&windows) {
            return Err(Error::InvalidFeatureSpec("multiplicity windows must be positive and ascending".into()));
        }
        if !ascending(&spans) {
            return Err(Error::InvalidFeatureSpec("EMA spans must be positive and ascending".into()));
        }
        if !self.multiplicity_threshold.is_finite() {
            return Err(Error::InvalidFeatureSpec("multiplicity threshold must be finite".into()));
        }
        if self.use_multiplicity {
            for &w in &self.multiplicity_windows {
                window_periods(w, period_days)?;
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        1 + if self.use_multiplicity { self.multiplicity_windows.len() } else { 0 }
            + if self.use_ema { self.ema_spans.len() } else { 0 }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["log_energy".to_string()];
        if self.use_multiplicity {
            names.extend(self.multiplicity_windows.iter().map(|w| format!("multiplicity_{w}w")));
        }
        if self.use_ema {
            names.extend(self.ema_spans.iter().map(|s| format!("ema_{s}")));
        }
        names
    }
}

/// Number of whole periods in a window of `weeks` weeks.
pub fn window_periods(weeks: u32, period_days: u32) -> Result<usize> {
    if weeks < 2 {
        return Err(Error::InvalidFeatureSpec(format!("multiplicity window of {weeks} weeks is below 2 weeks")));
    }
    let days = u64::from(weeks) * 7;
    if period_days == 0 || days % u64::from(period_days) != 0 {
        return Err(Error::InvalidFeatureSpec(format!(
            "{weeks}-week window is not a whole number of {period_days}-day periods"
        )));
    }
    Ok((days / u64::from(period_days)) as usize)
}

/// Event magnitudes grouped by active bin and period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinEvents {
    /// `per_bin[row]` is sorted by period.
    pub per_bin: Vec<Vec<(usize, f64)>>,
    pub period_days: u32,
}

impl BinEvents {
    /// Index events against the series' grid, layout and active bins.
    /// Events outside the layout or in inactive bins are dropped.
    pub fn index(events: &[CatalogEvent], set: &BinSeriesSet) -> Self {
        let mut row_of = vec![usize::MAX; set.grid.n_bins()];
        for (row, bin) in set.active_bins.iter().enumerate() {
            row_of[bin.0] = row;
        }
        let mut per_bin = vec![Vec::new(); set.n_bins()];
        for e in events {
            let (Ok(bin), Some(p)) = (set.grid.locate(e.latitude, e.longitude), set.layout.period_of(e.time)) else {
                continue;
            };
            if let Some(&row) = row_of.get(bin.0).filter(|&&r| r != usize::MAX) {
                per_bin[row].push((p, e.magnitude));
            }
        }
        for list in per_bin.iter_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        BinEvents {
            per_bin,
            period_days: set.layout.period_days,
        }
    }

    /// Per-period count of events in `row` with magnitude above `threshold`.
    pub fn exceedance_counts(&self, row: usize, threshold: f64, n_periods: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n_periods];
        for &(p, m) in &self.per_bin[row] {
            if m > threshold && p < n_periods {
                counts[p] += 1;
            }
        }
        counts
    }
}

/// Events in `row` above `threshold` during the `window_weeks` weeks that end
/// just before period `t`. The part of the window before the data start counts zero.
pub fn multiplicity(events: &BinEvents, row: usize, t: usize, window_weeks: u32, threshold: f64) -> Result<u32> {
    let w = window_periods(window_weeks, events.period_days)?;
    let list = events
        .per_bin
        .get(row)
        .ok_or_else(|| Error::InvalidArgument(format!("row {row} out of range")))?;
    let window = t.saturating_sub(w)..t;
    Ok(list
        .iter()
        .filter(|(p, m)| window.contains(p) && *m > threshold)
        .count() as u32)
}

/// Exponential moving average with `α = 2 / (span + 1)`, seeded with `x[0]`.
pub fn ema(series: &[f64], span: usize) -> Result<Vec<f64>> {
    if span == 0 {
        return Err(Error::InvalidArgument("EMA span must be at least 1".into()));
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(series.len());
    let mut acc = match series.first() {
        Some(&x) => x,
        None => return Ok(out),
    };
    out.push(acc);
    for &x in &series[1..] {
        acc = alpha * x + (1.0 - alpha) * acc;
        out.push(acc);
    }
    Ok(out)
}

/// Feature values for every (active bin, period).
///
/// Row `t` holds `[log-energy(t), multiplicity features…, EMA features…]`,
/// each depending only on periods `≤ t`. Multiplicity columns count the
/// window ending at `t` inclusive and are divided by `multiplicity_scales`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCube {
    pub active_bins: Vec<BinIndex>,
    pub n_periods: usize,
    pub columns: Vec<String>,
    pub spec: FeatureSpec,
    pub multiplicity_scales: Vec<f64>,
    data: Vec<f64>,
}

impl FeatureCube {
    /// Build the cube. With `scale_boundary = Some(b)` each multiplicity column
    /// is divided by its maximum over periods `< b`; `None` leaves raw counts.
    pub fn build(
        set: &BinSeriesSet,
        events: Option<&BinEvents>,
        spec: &FeatureSpec,
        scale_boundary: Option<usize>,
    ) -> Result<Self> {
        spec.validate(set.layout.period_days)?;
        let events = match (spec.use_multiplicity, events) {
            (true, None) => {
                return Err(Error::InvalidFeatureSpec("multiplicity features need the event list".into()));
            }
            (true, Some(ev)) if ev.per_bin.len() != set.n_bins() => {
                return Err(Error::ShapeMismatch("event index does not match the active bins".into()));
            }
            (_, ev) => ev,
        };
        let n_periods = set.n_periods();
        let n_features = spec.n_features();
        let mut data = vec![0.0; set.n_bins() * n_periods * n_features];
        let n_mult = if spec.use_multiplicity { spec.multiplicity_windows.len() } else { 0 };
        let mut mult_max = vec![0.0f64; n_mult];

        for row in 0..set.n_bins() {
            let base = row * n_periods * n_features;
            let cell = |t: usize, f: usize| base + t * n_features + f;
            for t in 0..n_periods {
                data[cell(t, 0)] = set.values[row][t];
            }
            let mut col = 1;
            if let Some(ev) = events.filter(|_| spec.use_multiplicity) {
                let counts = ev.exceedance_counts(row, spec.multiplicity_threshold, n_periods);
                let mut prefix = vec![0u64; n_periods + 1];
                for t in 0..n_periods {
                    prefix[t + 1] = prefix[t] + u64::from(counts[t]);
                }
                for (k, &weeks) in spec.multiplicity_windows.iter().enumerate() {
                    let w = window_periods(weeks, set.layout.period_days)?;
                    for t in 0..n_periods {
                        let v = (prefix[t + 1] - prefix[(t + 1).saturating_sub(w)]) as f64;
                        data[cell(t, col)] = v;
                        if scale_boundary.is_some_and(|b| t < b) {
                            mult_max[k] = mult_max[k].max(v);
                        }
                    }
                    col += 1;
                }
            }
            if spec.use_ema {
                for &span in &spec.ema_spans {
                    for (t, v) in ema(&set.values[row], span)?.into_iter().enumerate() {
                        data[cell(t, col)] = v;
                    }
                    col += 1;
                }
            }
        }

        let multiplicity_scales: Vec<f64> = match scale_boundary {
            Some(_) => mult_max.iter().map(|&m| if m > 0.0 { m } else { 1.0 }).collect(),
            None => vec![1.0; n_mult],
        };
        if multiplicity_scales.iter().any(|&s| s != 1.0) {
            for chunk in data.chunks_mut(n_features) {
                for (k, s) in multiplicity_scales.iter().enumerate() {
                    chunk[1 + k] /= s;
                }
            }
        }

        Ok(FeatureCube {
            active_bins: set.active_bins.clone(),
            n_periods,
            columns: spec.column_names(),
            spec: spec.clone(),
            multiplicity_scales,
            data,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.active_bins.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, bin_row: usize, t: usize) -> &[f64] {
        let f = self.n_features();
        let start = (bin_row * self.n_periods + t) * f;
        &self.data[start..start + f]
    }

    /// Feature rows for periods `periods` of one bin, flattened row-major.
    pub fn block(&self, bin_row: usize, periods: Range<usize>) -> &[f64] {
        let f = self.n_features();
        let start = (bin_row * self.n_periods + periods.start) * f;
        &self.data[start..start + periods.len() * f]
    }

    pub fn log_energy(&self, bin_row: usize, t: usize) -> f64 {
        self.row(bin_row, t)[0]
    }
}

/// One supervised example: the `lookback` rows preceding `t_target` and the
/// normalized log-energy at `t_target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWindow<'a> {
    pub bin: BinIndex,
    pub bin_row: usize,
    pub t_target: usize,
    /// `lookback_len × n_features`, oldest row first.
    pub lookback: &'a [f64],
    pub n_features: usize,
    pub target: f64,
}

impl SampleWindow<'_> {
    pub fn lookback_len(&self) -> usize {
        self.lookback.len() / self.n_features
    }

    pub fn lookback_row(&self, i: usize) -> &[f64] {
        &self.lookback[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Every (active bin, target period) pair for targets in `targets`.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub cube: Arc<FeatureCube>,
    pub lookback: usize,
    pub targets: Range<usize>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.cube.n_bins() * self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.cube.n_features()
    }

    pub fn window(&self, bin_row: usize, t: usize) -> SampleWindow<'_> {
        debug_assert!(t >= self.lookback && t < self.cube.n_periods);
        SampleWindow {
            bin: self.cube.active_bins[bin_row],
            bin_row,
            t_target: t,
            lookback: self.cube.block(bin_row, t - self.lookback..t),
            n_features: self.cube.n_features(),
            target: self.cube.log_energy(bin_row, t),
        }
    }

    /// Sample `i`, enumerating bins fastest within each target period.
    pub fn get(&self, i: usize) -> SampleWindow<'_> {
        let n = self.cube.n_bins();
        self.window(i % n, self.targets.start + i / n)
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleWindow<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Build train and test sample sets. A sample's target is in the train set
/// iff it precedes `split_boundary`; test lookbacks may reach back into train.
pub fn make_windows(
    set: &BinSeriesSet,
    events: Option<&BinEvents>,
    spec: &FeatureSpec,
    lookback: usize,
    split_boundary: usize,
) -> Result<(SampleSet, SampleSet)> {
    let n = set.n_periods();
    if lookback == 0 || lookback >= n {
        return Err(Error::InvalidArgument(format!(
            "lookback {lookback} must be in [1, {n}) periods"
        )));
    }
    if split_boundary == 0 || split_boundary >= n {
        return Err(Error::InvalidSplit(format!("boundary {split_boundary} outside (0, {n})")));
    }
    let cube = Arc::new(FeatureCube::build(set, events, spec, Some(split_boundary))?);
    Ok(sets_from_cube(cube, lookback, split_boundary))
}

fn sets_from_cube(cube: Arc<FeatureCube>, lookback: usize, split_boundary: usize) -> (SampleSet, SampleSet) {
    let n = cube.n_periods;
    let train = SampleSet {
        cube: cube.clone(),
        lookback,
        targets: lookback..split_boundary.max(lookback),
    };
    let test = SampleSet {
        cube,
        lookback,
        targets: split_boundary.max(lookback)..n,
    };
    (train, test)
}

/// JSON sidecar describing an exported feature cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLayout {
    pub columns: Vec<String>,
    pub lookback: usize,
    pub split_boundary: usize,
    pub n_periods: usize,
    pub active_bins: Vec<usize>,
    pub spec: FeatureSpec,
    pub multiplicity_scales: Vec<f64>,
}

/// Export the train/test pair as `features.csv` plus `layout.json`.
pub fn save_samples(train: &SampleSet, test: &SampleSet, dir: &Path) -> Result<()> {
    let cube = &train.cube;
    let layout = SampleLayout {
        columns: cube.columns.clone(),
        lookback: train.lookback,
        split_boundary: test.targets.start.max(train.targets.end),
        n_periods: cube.n_periods,
        active_bins: cube.active_bins.iter().map(|b| b.0).collect(),
        spec: cube.spec.clone(),
        multiplicity_scales: cube.multiplicity_scales.clone(),
    };
    let mut csv = String::from("bin_index,period_index");
    for c in &cube.columns {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    for (row, bin) in cube.active_bins.iter().enumerate() {
        for t in 0..cube.n_periods {
            csv.push_str(&format!("{bin},{t}"));
            for v in cube.row(row, t) {
                csv.push(',');
                csv.push_str(&textio::fmt_f64(*v));
            }
            csv.push('\n');
        }
    }
    textio::write(&dir.join("layout.json"), serde_json::to_string_pretty(&layout)? + "\n")?;
    textio::write(&dir.join("features.csv"), csv)
}

pub fn load_samples(dir: &Path) -> Result<(SampleSet, SampleSet)> {
    parse_samples(
        &textio::read_to_string(&dir.join("layout.json"))?,
        &textio::read_to_string(&dir.join("features.csv"))?,
    )
}

pub fn parse_samples(layout_json: &str, features_csv: &str) -> Result<(SampleSet, SampleSet)> {
    let layout: SampleLayout = serde_json::from_str(layout_json)?;
    let n_features = layout.columns.len();
    let n = layout.n_periods;
    if n_features == 0 || layout.lookback == 0 || layout.lookback >= n || layout.split_boundary >= n {
        return Err(Error::Parse("inconsistent sample layout".into()));
    }
    let n_mult = if layout.spec.use_multiplicity { layout.spec.multiplicity_windows.len() } else { 0 };
    if layout.spec.n_features() != n_features || layout.multiplicity_scales.len() != n_mult {
        return Err(Error::Parse("columns do not match the feature spec".into()));
    }
    let cells = layout
        .active_bins
        .len()
        .checked_mul(n)
        .and_then(|c| c.checked_mul(n_features))
        .filter(|&c| c <= features_csv.len())
        .ok_or_else(|| Error::Parse("layout larger than the feature table".into()))?;

    let mut lines = features_csv.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
    let expected: Vec<String> = ["bin_index", "period_index"]
        .into_iter()
        .map(String::from)
        .chain(layout.columns.iter().cloned())
        .collect();
    if header.split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse("feature table header does not match the layout".into()));
    }

    let mut data = Vec::with_capacity(cells);
    for (row, &bin) in layout.active_bins.iter().enumerate() {
        for t in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row for bin {bin}, period {t}")))?;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n_features + 2
                || fields[0].parse::<usize>().ok() != Some(bin)
                || fields[1].parse::<usize>().ok() != Some(t)
            {
                return Err(Error::Parse(format!("row {} is out of place", row * n + t + 1)));
            }
            for f in &fields[2..] {
                let v: f64 = f.parse().map_err(|_| Error::Parse(format!("bad value `{f}`")))?;
                if !v.is_finite() {
                    return Err(Error::Parse("non-finite feature value".into()));
                }
                data.push(v);
            }
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing rows in feature table".into()));
    }
    let cube = Arc::new(FeatureCube {
        active_bins: layout.active_bins.iter().map(|&b| BinIndex(b)).collect(),
        n_periods: n,
        columns: layout.columns,
        spec: layout.spec,
        multiplicity_scales: layout.multiplicity_scales,
        data,
    });
    Ok(sets_from_cube(cube, layout.lookback, layout.split_boundary))
}
