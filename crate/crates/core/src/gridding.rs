//! Spatial binning and biweekly log-energy series.

use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogEvent, RegionFilter};
use crate::error::{Error, Result};
use crate::textio;

/// Row-major index of a cell in a [`SpatialGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinIndex(pub usize);

impl std::fmt::Display for BinIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub lat_min: f64,
    pub lon_min: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl SpatialGrid {
    pub fn new(lat_min: f64, lon_min: f64, cell_size: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell size {cell_size} must be positive")));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell".into()));
        }
        if !(lat_min.is_finite() && lon_min.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(SpatialGrid {
            lat_min,
            lon_min,
            cell_size,
            n_rows,
            n_cols,
        })
    }

    /// Grid tiling `region` exactly; each span must be a whole number of cells.
    pub fn covering(region: &RegionFilter, cell_size: f64) -> Result<Self> {
        let cells = |lo: f64, hi: f64, axis: &str| -> Result<usize> {
            let n = (hi - lo) / cell_size;
            let rounded = n.round();
            if (n - rounded).abs() > 1e-6 || rounded < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "{axis} span {} is not a whole number of {cell_size}° cells",
                    hi - lo
                )));
            }
            Ok(rounded as usize)
        };
        let n_rows = cells(region.lat_min, region.lat_max, "latitude")?;
        let n_cols = cells(region.lon_min, region.lon_max, "longitude")?;
        SpatialGrid::new(region.lat_min, region.lon_min, cell_size, n_rows, n_cols)
    }

    pub fn n_bins(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn bin_at(&self, row: usize, col: usize) -> BinIndex {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        BinIndex(row * self.n_cols + col)
    }

    pub fn row_col(&self, bin: BinIndex) -> (usize, usize) {
        (bin.0 / self.n_cols, bin.0 % self.n_cols)
    }

    /// Lower edge of latitude row `row` (or upper edge of row `row - 1`).
    pub fn lat_edge(&self, row: usize) -> f64 {
        self.lat_min + row as f64 * self.cell_size
    }

    pub fn lon_edge(&self, col: usize) -> f64 {
        self.lon_min + col as f64 * self.cell_size
    }

    pub fn center(&self, bin: BinIndex) -> (f64, f64) {
        let (row, col) = self.row_col(bin);
        (
            self.lat_min + (row as f64 + 0.5) * self.cell_size,
            self.lon_min + (col as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `(lat, lon)`; cells are half-open on their upper edges.
    pub fn locate(&self, lat: f64, lon: f64) -> Result<BinIndex> {
        let row = axis_cell(lat, self.n_rows, |i| self.lat_edge(i));
        let col = axis_cell(lon, self.n_cols, |i| self.lon_edge(i));
        match (row, col) {
            (Some(r), Some(c)) => Ok(self.bin_at(r, c)),
            _ => Err(Error::OutOfExtent { lat, lon }),
        }
    }
}

// floor((x - origin) / size) can land one cell off near an edge; the edge
// function is the ground truth.
fn axis_cell(x: f64, n: usize, edge: impl Fn(usize) -> f64) -> Option<usize> {
    if !x.is_finite() || x < edge(0) || x >= edge(n) {
        return None;
    }
    let size = edge(1) - edge(0);
    let mut i = (((x - edge(0)) / size).floor().max(0.0) as usize).min(n - 1);
    while i > 0 && x < edge(i) {
        i -= 1;
    }
    while i + 1 < n && x >= edge(i + 1) {
        i += 1;
    }
    Some(i)
}

pub fn assign_bin(event: &CatalogEvent, grid: &SpatialGrid) -> Result<BinIndex> {
    grid.locate(event.latitude, event.longitude)
}

/// Log of the total radiated energy of a set of events, in magnitude units:
/// `(1/1.5)·log10(Σ 10^(1.5·m))`.
///
/// The largest term is factored out before summing. An empty set yields 0.
pub fn log_energy(magnitudes: &[f64]) -> Result<f64> {
    if let Some(&bad) = magnitudes.iter().find(|m| !m.is_finite()) {
        return Err(Error::NonFiniteMagnitude(bad));
    }
    let Some(max) = magnitudes.iter().copied().reduce(f64::max) else {
        return Ok(0.0);
    };
    let scaled: f64 = magnitudes.iter().map(|m| 10f64.powf(1.5 * (m - max))).sum();
    Ok(max + scaled.log10() / 1.5)
}

/// Consecutive fixed-length periods starting at `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodLayout {
    pub anchor: DateTime<Utc>,
    pub period_days: u32,
    pub n_periods: usize,
}

impl PeriodLayout {
    /// Whole periods from `anchor` up to `t_end`; a trailing partial period is dropped.
    pub fn spanning(anchor: DateTime<Utc>, period_days: u32, t_end: DateTime<Utc>) -> Result<Self> {
        if period_days == 0 {
            return Err(Error::InvalidArgument("period length must be positive".into()));
        }
        let secs = (t_end - anchor).num_seconds();
        let n = secs.div_euclid(i64::from(period_days) * 86_400);
        if secs <= 0 || n < 1 {
            return Err(Error::SpanTooShort { period_days });
        }
        Ok(PeriodLayout {
            anchor,
            period_days,
            n_periods: n as usize,
        })
    }

    pub fn default_anchor() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(1986, 1, 1, 0, 0, 0).unwrap()
    }

    fn period_secs(&self) -> i64 {
        i64::from(self.period_days) * 86_400
    }

    pub fn period_of(&self, time: DateTime<Utc>) -> Option<usize> {
        let secs = (time - self.anchor).num_seconds();
        if secs < 0 {
            return None;
        }
        let p = (secs / self.period_secs()) as usize;
        (p < self.n_periods).then_some(p)
    }

    pub fn start_of(&self, period: usize) -> DateTime<Utc> {
        self.anchor + Duration::seconds(self.period_secs() * period as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start_of(self.n_periods)
    }
}

/// Per-bin log-energy series over a common period layout.
///
/// Row `i` of `values` and `counts` belongs to `active_bins[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSeriesSet {
    pub grid: SpatialGrid,
    pub layout: PeriodLayout,
    pub active_bins: Vec<BinIndex>,
    pub values: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u32>>,
    /// Product of every divisor applied by [`normalize`]; 1 for raw series.
    pub norm_constant: f64,
}

impl BinSeriesSet {
    pub fn n_periods(&self) -> usize {
        self.layout.n_periods
    }

    pub fn n_bins(&self) -> usize {
        self.active_bins.len()
    }

    pub fn times(&self) -> Vec<DateTime<Utc>> {
        (0..self.n_periods()).map(|p| self.layout.start_of(p)).collect()
    }

    pub fn position_of(&self, bin: BinIndex) -> Option<usize> {
        self.active_bins.iter().position(|&b| b == bin)
    }

    pub fn total_count(&self, row: usize) -> u64 {
        self.counts[row].iter().map(|&c| u64::from(c)).sum()
    }

    /// Keep only `bins`, in the given order.
    pub fn restrict(&self, bins: &[BinIndex]) -> Result<Self> {
        let mut values = Vec::with_capacity(bins.len());
        let mut counts = Vec::with_capacity(bins.len());
        for &bin in bins {
            let row = self
                .position_of(bin)
                .ok_or_else(|| Error::InvalidArgument(format!("bin {bin} is not in the series set")))?;
            values.push(self.values[row].clone());
            counts.push(self.counts[row].clone());
        }
        Ok(BinSeriesSet {
            grid: self.grid,
            layout: self.layout,
            active_bins: bins.to_vec(),
            values,
            counts,
            norm_constant: self.norm_constant,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = SeriesMeta::from(self);
        textio::write(&dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        textio::write(
            &dir.join("values.csv"),
            textio::matrix_to_csv(&self.values, |v| textio::fmt_f64(*v)),
        )?;
        textio::write(
            &dir.join("counts.csv"),
            textio::matrix_to_csv(&self.counts, |v| v.to_string()),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = textio::read_to_string(&dir.join("meta.json"))?;
        let values = textio::read_to_string(&dir.join("values.csv"))?;
        let counts = textio::read_to_string(&dir.join("counts.csv"))?;
        Self::from_parts(&meta, &values, &counts)
    }

    /// Reassemble a set from its metadata record and the two matrices.
    pub fn from_parts(meta: &str, values: &str, counts: &str) -> Result<Self> {
        let meta: SeriesMeta = serde_json::from_str(meta)?;
        let grid = SpatialGrid::new(meta.lat_min, meta.lon_min, meta.cell_size, meta.n_rows, meta.n_cols)?;
        let anchor = DateTime::parse_from_rfc3339(&meta.anchor)
            .map_err(|e| Error::Parse(format!("anchor `{}`: {e}", meta.anchor)))?
            .with_timezone(&Utc);
        if meta.period_days == 0 || meta.n_periods == 0 {
            return Err(Error::Parse("period layout must be non-empty".into()));
        }
        // the layout end must stay representable
        i64::try_from(meta.n_periods)
            .ok()
            .and_then(|n| n.checked_mul(i64::from(meta.period_days)))
            .and_then(Duration::try_days)
            .and_then(|span| anchor.checked_add_signed(span))
            .ok_or_else(|| Error::Parse("period layout too long".into()))?;
        if !(meta.norm_constant.is_finite() && meta.norm_constant > 0.0) {
            return Err(Error::Parse(format!("bad norm constant {}", meta.norm_constant)));
        }
        let active_bins: Vec<BinIndex> = meta.active_bins.iter().map(|&b| BinIndex(b)).collect();
        if let Some(bad) = active_bins.iter().find(|b| b.0 >= grid.n_bins()) {
            return Err(Error::Parse(format!("bin {bad} outside the grid")));
        }
        let values: Vec<Vec<f64>> = textio::parse_matrix(values, meta.n_periods)?;
        let counts: Vec<Vec<u32>> = textio::parse_matrix(counts, meta.n_periods)?;
        if values.len() != active_bins.len() || counts.len() != active_bins.len() {
            return Err(Error::Parse(format!(
                "expected {} rows, found {} values / {} counts",
                active_bins.len(),
                values.len(),
                counts.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite series value".into()));
        }
        Ok(BinSeriesSet {
            grid,
            layout: PeriodLayout {
                anchor,
                period_days: meta.period_days,
                n_periods: meta.n_periods,
            },
            active_bins,
            values,
            counts,
            norm_constant: meta.norm_constant,
        })
    }
}

/// JSON metadata record stored next to the value and count matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub lat_min: f64,
    pub lon_min: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub anchor: String,
    pub period_days: u32,
    pub n_periods: usize,
    pub norm_constant: f64,
    pub active_bins: Vec<usize>,
}

impl From<&BinSeriesSet> for SeriesMeta {
    fn from(set: &BinSeriesSet) -> Self {
        SeriesMeta {
            lat_min: set.grid.lat_min,
            lon_min: set.grid.lon_min,
            cell_size: set.grid.cell_size,
            n_rows: set.grid.n_rows,
            n_cols: set.grid.n_cols,
            anchor: set.layout.anchor.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            period_days: set.layout.period_days,
            n_periods: set.layout.n_periods,
            norm_constant: set.norm_constant,
            active_bins: set.active_bins.iter().map(|b| b.0).collect(),
        }
    }
}

/// Build one raw log-energy series per grid cell.
///
/// Period `p` covers `[anchor + p·len, anchor + (p+1)·len)`. Events outside the
/// layout are ignored; events outside the grid are an error.
pub fn build_series(
    events: &[CatalogEvent],
    grid: &SpatialGrid,
    anchor: DateTime<Utc>,
    period_days: u32,
    t_end: DateTime<Utc>,
) -> Result<BinSeriesSet> {
    let layout = PeriodLayout::spanning(anchor, period_days, t_end)?;
    let n_bins = grid.n_bins();
    let n_periods = layout.n_periods;

    let mut keyed = Vec::with_capacity(events.len());
    for e in events {
        let bin = assign_bin(e, grid)?;
        if let Some(p) = layout.period_of(e.time) {
            keyed.push((bin.0, p, e.magnitude));
        }
    }
    // group by cell; sorting magnitudes makes the sum order-independent
    keyed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

    let mut values = vec![vec![0.0; n_periods]; n_bins];
    let mut counts = vec![vec![0u32; n_periods]; n_bins];
    let mut mags = Vec::new();
    for group in keyed.chunk_by(|a, b| (a.0, a.1) == (b.0, b.1)) {
        let (bin, period) = (group[0].0, group[0].1);
        mags.clear();
        mags.extend(group.iter().map(|k| k.2));
        values[bin][period] = log_energy(&mags)?;
        counts[bin][period] = group.len() as u32;
    }

    Ok(BinSeriesSet {
        grid: *grid,
        layout,
        active_bins: (0..n_bins).map(BinIndex).collect(),
        values,
        counts,
        norm_constant: 1.0,
    })
}

/// The `k` bins with the most events, by count descending then bin index ascending.
pub fn select_active_bins(set: &BinSeriesSet, k: usize) -> Result<Vec<BinIndex>> {
    if k > set.n_bins() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} active bins out of {}",
            set.n_bins()
        )));
    }
    let mut ranked: Vec<(u64, BinIndex)> = (0..set.n_bins())
        .map(|row| (set.total_count(row), set.active_bins[row]))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k).map(|(_, b)| b).collect())
}

/// Which periods determine the normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Every period, train and test.
    #[default]
    Full,
    /// Only periods before the given boundary.
    TrainOnly(usize),
}

/// Divide every value by the global maximum absolute value.
pub fn normalize(mut set: BinSeriesSet, scope: NormScope) -> Result<BinSeriesSet> {
    let end = match scope {
        NormScope::Full => set.n_periods(),
        NormScope::TrainOnly(b) => b.min(set.n_periods()),
    };
    let max_abs = set
        .values
        .iter()
        .flat_map(|row| row[..end].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Err(Error::Degenerate("every series value is zero".into()));
    }
    for v in set.values.iter_mut().flatten() {
        *v /= max_abs;
    }
    set.norm_constant *= max_abs;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8 }
    }
}

impl SplitSpec {
    /// `floor(train_fraction · n_periods)`; must fall strictly inside the series.
    pub fn boundary(&self, n_periods: usize) -> Result<usize> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        let boundary = (self.train_fraction * n_periods as f64).floor() as usize;
        if boundary == 0 || boundary >= n_periods {
            return Err(Error::InvalidSplit(format!(
                "boundary {boundary} is not strictly inside {n_periods} periods"
            )));
        }
        Ok(boundary)
    }
}

/// Borrowed window over a contiguous period range of a [`BinSeriesSet`].
#[derive(Debug, Clone)]
pub struct SeriesView<'a> {
    pub set: &'a BinSeriesSet,
    pub periods: Range<usize>,
}

impl<'a> SeriesView<'a> {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn series(&self, row: usize) -> &'a [f64] {
        &self.set.values[row][self.periods.clone()]
    }
}

pub fn split<'a>(set: &'a BinSeriesSet, spec: &SplitSpec) -> Result<(SeriesView<'a>, SeriesView<'a>)> {
    let boundary = spec.boundary(set.n_periods())?;
    Ok((
        SeriesView {
            set,
            periods: 0..boundary,
        },
        SeriesView {
            set,
            periods: boundary..set.n_periods(),
        },
    ))
}
