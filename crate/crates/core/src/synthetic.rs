//! Deterministic synthetic data: the bundled mini-catalog and AR(1) panels.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::catalog::{CatalogEvent, RegionFilter};
use crate::error::{Error, Result};
use crate::gridding::{BinIndex, BinSeriesSet, PeriodLayout, SpatialGrid};

/// Seed used for the catalog shipped in `data/mini/`.
pub const MINI_CATALOG_SEED: u64 = 20_240_101;

/// Extent of the mini-catalog: 4 × 5 cells of 0.1°, 60 periods of 14 days.
pub fn mini_region() -> RegionFilter {
    let start = Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap();
    RegionFilter {
        lat_min: 34.0,
        lat_max: 34.4,
        lon_min: -117.0,
        lon_max: -116.5,
        t_start: start,
        t_end: start + Duration::days(60 * 14),
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// Gutenberg-Richter magnitude with b = 1 above `m_min`, capped at `m_max`.
fn gr_magnitude<R: Rng>(rng: &mut R, m_min: f64, m_max: f64) -> f64 {
    let excess = Exp::new(std::f64::consts::LN_10).expect("positive rate").sample(rng);
    round_to((m_min + excess).min(m_max), 2)
}

/// Point inside cell `(row, col)` of the mini grid, kept off the cell edges
/// so that 4-decimal rounding cannot move it into a neighbor.
fn point_in_cell<R: Rng>(rng: &mut R, region: &RegionFilter, row: usize, col: usize) -> (f64, f64) {
    let lat = region.lat_min + 0.1 * row as f64 + rng.gen_range(0.005..0.095);
    let lon = region.lon_min + 0.1 * col as f64 + rng.gen_range(0.005..0.095);
    (round_to(lat, 4), round_to(lon, 4))
}

fn event_at<R: Rng>(rng: &mut R, region: &RegionFilter, cell: usize, time: DateTime<Utc>, magnitude: f64) -> CatalogEvent {
    let (latitude, longitude) = point_in_cell(rng, region, cell / 5, cell % 5);
    CatalogEvent {
        time,
        latitude,
        longitude,
        depth: round_to(rng.gen_range(2.0..15.0), 2),
        magnitude,
    }
}

/// About 200 events: a heterogeneous background plus a few clustered
/// sequences, sorted by time.
pub fn mini_catalog(seed: u64) -> Vec<CatalogEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = mini_region();
    let span_secs = (region.t_end - region.t_start).num_seconds();
    let n_cells = 20;

    // Background: per-cell weights so some cells are clearly busier.
    let weights: Vec<f64> = (0..n_cells).map(|_| rng.gen_range(0.3..2.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut events = Vec::new();
    for _ in 0..130 {
        let mut pick = rng.gen_range(0.0..total);
        let mut cell = 0;
        while pick >= weights[cell] && cell + 1 < n_cells {
            pick -= weights[cell];
            cell += 1;
        }
        let time = region.t_start + Duration::seconds(rng.gen_range(0..span_secs));
        let mag = gr_magnitude(&mut rng, 2.0, 3.9);
        events.push(event_at(&mut rng, &region, cell, time, mag));
    }

    // Sequences: a mainshock followed by aftershocks in the same cell.
    let aftershock_gap = Exp::new(1.0 / (8.0 * 86_400.0)).expect("positive rate");
    for _ in 0..5 {
        let cell = rng.gen_range(0..n_cells);
        let offset = rng.gen_range(0..span_secs * 9 / 10);
        let main_time = region.t_start + Duration::seconds(offset);
        let main_mag = round_to(rng.gen_range(4.0..5.2), 2);
        events.push(event_at(&mut rng, &region, cell, main_time, main_mag));
        let mut t = main_time;
        for _ in 0..rng.gen_range(6..12) {
            t += Duration::seconds(aftershock_gap.sample(&mut rng) as i64 + 1);
            if t >= region.t_end {
                break;
            }
            let mag = gr_magnitude(&mut rng, 2.0, main_mag - 0.5);
            events.push(event_at(&mut rng, &region, cell, t, mag));
        }
    }
    events.sort_by_key(|e| e.time);
    events
}

/// Stationary unit-variance AR(1) panel: `x_t = ρ·x_{t−1} + sqrt(1−ρ²)·ε_t`.
pub fn ar1_panel(n_bins: usize, n_periods: usize, rho: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("autocorrelation {rho} must lie in (-1, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let innovation = (1.0 - rho * rho).sqrt();
    Ok((0..n_bins)
        .map(|_| {
            let mut x = normal.sample(&mut rng);
            (0..n_periods)
                .map(|_| {
                    let v = x;
                    x = rho * x + innovation * normal.sample(&mut rng);
                    v
                })
                .collect()
        })
        .collect())
}

/// Wrap a value panel as a series set on a one-row grid, one cell per series.
pub fn panel_series_set(values: Vec<Vec<f64>>) -> Result<BinSeriesSet> {
    let n_bins = values.len();
    let n_periods = values.first().map_or(0, Vec::len);
    if n_bins == 0 || n_periods == 0 || values.iter().any(|r| r.len() != n_periods) {
        return Err(Error::ShapeMismatch("panel must be a non-empty rectangle".into()));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("panel contains non-finite values".into()));
    }
    Ok(BinSeriesSet {
        grid: SpatialGrid::new(0.0, 0.0, 0.1, 1, n_bins)?,
        layout: PeriodLayout {
            anchor: PeriodLayout::default_anchor(),
            period_days: 14,
            n_periods,
        },
        active_bins: (0..n_bins).map(BinIndex).collect(),
        counts: vec![vec![0; n_periods]; n_bins],
        values,
        norm_constant: 1.0,
    })
}
