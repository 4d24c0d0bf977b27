//! Earthquake catalog ingestion.
//!
//! Reads comma-separated catalogs using the USGS export column names
//! (`time`, `latitude`, `longitude`, `depth`, `mag`); other columns are ignored.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REQUIRED_COLUMNS: [&str; 5] = ["time", "latitude", "longitude", "depth", "mag"];

/// One seismic event. Times are UTC with whole-second resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogEvent {
    pub time: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub depth: f64,
    pub magnitude: f64,
}

/// Result of parsing a catalog: events sorted by time plus row accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCatalog {
    pub events: Vec<CatalogEvent>,
    /// Data rows that could not be turned into an event.
    pub skipped: usize,
    /// Events whose negative magnitude was clamped to zero.
    pub clamped: usize,
}

impl ParsedCatalog {
    pub fn total_rows(&self) -> usize {
        self.events.len() + self.skipped
    }
}

/// Half-open spatial and temporal box: `[min, max)` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionFilter {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub t_start: DateTime<Utc>,
    pub t_end: DateTime<Utc>,
}

impl RegionFilter {
    pub fn new(
        lat: (f64, f64),
        lon: (f64, f64),
        t_start: DateTime<Utc>,
        t_end: DateTime<Utc>,
    ) -> Result<Self> {
        let filter = RegionFilter {
            lat_min: lat.0,
            lat_max: lat.1,
            lon_min: lon.0,
            lon_max: lon.1,
            t_start,
            t_end,
        };
        filter.validate()?;
        Ok(filter)
    }

    /// Southern California study box, 1986-01-01 to 2024-01-01.
    pub fn southern_california() -> Self {
        RegionFilter {
            lat_min: 32.0,
            lat_max: 36.0,
            lon_min: -120.0,
            lon_max: -114.0,
            t_start: Utc.with_ymd_and_hms(1986, 1, 1, 0, 0, 0).unwrap(),
            t_end: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRegion("non-finite bound".into()));
        }
        if !(self.lat_min < self.lat_max) {
            return Err(Error::InvalidRegion(format!(
                "lat_min {} must be below lat_max {}",
                self.lat_min, self.lat_max
            )));
        }
        if !(self.lon_min < self.lon_max) {
            return Err(Error::InvalidRegion(format!(
                "lon_min {} must be below lon_max {}",
                self.lon_min, self.lon_max
            )));
        }
        if self.t_start >= self.t_end {
            return Err(Error::InvalidRegion(format!(
                "t_start {} must precede t_end {}",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    pub fn contains(&self, event: &CatalogEvent) -> bool {
        (self.lat_min..self.lat_max).contains(&event.latitude)
            && (self.lon_min..self.lon_max).contains(&event.longitude)
            && (self.t_start..self.t_end).contains(&event.time)
    }
}

/// Parse a catalog. Unparseable rows are skipped and counted.
///
/// Fails only when the header lacks one of the required columns.
pub fn parse_catalog<R: Read>(source: R) -> Result<ParsedCatalog> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.byte_headers()?.clone();
    let mut columns = [0usize; 5];
    for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| trim_bom(h).eq_ignore_ascii_case(name.as_bytes()))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut parsed = ParsedCatalog::default();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                parsed.skipped += 1;
                continue;
            }
        }
        match parse_row(&record, &columns) {
            Some((event, clamped)) => {
                parsed.clamped += usize::from(clamped);
                parsed.events.push(event);
            }
            None => parsed.skipped += 1,
        }
    }
    // stable: equal timestamps keep file order
    parsed.events.sort_by_key(|e| e.time);
    Ok(parsed)
}

fn trim_bom(field: &[u8]) -> &[u8] {
    field.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(field)
}

fn parse_row(record: &csv::ByteRecord, columns: &[usize; 5]) -> Option<(CatalogEvent, bool)> {
    let field = |i: usize| -> Option<&str> { std::str::from_utf8(record.get(columns[i])?).ok() };
    let number = |i: usize| -> Option<f64> {
        let v: f64 = field(i)?.parse().ok()?;
        v.is_finite().then_some(v)
    };

    let time = parse_time(field(0)?)?;
    let latitude = number(1)?;
    let longitude = number(2)?;
    let depth = number(3)?;
    let mut magnitude = number(4)?;
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return None;
    }
    let clamped = magnitude < 0.0;
    if clamped {
        magnitude = 0.0;
    }
    Some((
        CatalogEvent {
            time,
            latitude,
            longitude,
            depth,
            magnitude,
        },
        clamped,
    ))
}

/// Parse a timestamp into UTC, truncating sub-second precision.
///
/// Accepts RFC 3339 (`2019-07-06T03:19:53.040Z`), naive date-times with
/// `T` or space separators (taken as UTC), and bare dates.
pub fn parse_time(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    let parsed = if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        t.with_timezone(&Utc)
    } else if let Some(t) = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y/%m/%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
    {
        t.and_utc()
    } else {
        NaiveDate::parse_from_str(text, "%Y-%m-%d")
            .ok()?
            .and_hms_opt(0, 0, 0)?
            .and_utc()
    };
    DateTime::from_timestamp(parsed.timestamp(), 0)
}

/// Keep events inside the half-open region box, preserving order.
pub fn filter_region(events: &[CatalogEvent], filter: &RegionFilter) -> Vec<CatalogEvent> {
    events.iter().filter(|e| filter.contains(e)).copied().collect()
}

/// Write events in the same column layout `parse_catalog` reads.
pub fn write_catalog<W: Write>(events: &[CatalogEvent], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(REQUIRED_COLUMNS)?;
    for e in events {
        writer.write_record([
            e.time.to_rfc3339_opts(SecondsFormat::Secs, true),
            e.latitude.to_string(),
            e.longitude.to_string(),
            e.depth.to_string(),
            e.magnitude.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<catalog>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "time,latitude,longitude,depth,mag,magType,place\n";

    fn ts(s: &str) -> DateTime<Utc> {
        parse_time(s).unwrap()
    }

    fn event(t: &str, lat: f64, lon: f64) -> CatalogEvent {
        CatalogEvent {
            time: ts(t),
            latitude: lat,
            longitude: lon,
            depth: 5.0,
            magnitude: 2.0,
        }
    }

    #[test]
    fn ridgecrest_row_maps_fields() {
        let text = "time, latitude, longitude, depth, mag\n2019-07-06T03:19:53Z, 35.77, -117.599, 8.0, 7.1\n";
        let parsed = parse_catalog(text.as_bytes()).unwrap();
        assert_eq!(parsed.skipped, 0);
        let e = parsed.events[0];
        assert_eq!(e.magnitude, 7.1);
        assert_eq!(e.latitude, 35.77);
        assert_eq!(e.longitude, -117.599);
        assert_eq!(e.depth, 8.0);
        assert_eq!(e.time, Utc.with_ymd_and_hms(2019, 7, 6, 3, 19, 53).unwrap());
    }

    #[test]
    fn header_only_is_empty() {
        let parsed = parse_catalog(HEADER.as_bytes()).unwrap();
        assert!(parsed.events.is_empty());
        assert_eq!(parsed.skipped, 0);
    }

    #[test]
    fn out_of_order_rows_sorted() {
        let text = format!(
            "{HEADER}2001-01-03T00:00:00Z,33,-117,1,1.0,ml,a\n\
             2001-01-01T00:00:00Z,33,-117,1,2.0,ml,b\n\
             2001-01-02T00:00:00Z,33,-117,1,3.0,ml,c\n"
        );
        let parsed = parse_catalog(text.as_bytes()).unwrap();
        let mut oracle: Vec<_> = parsed.events.clone();
        oracle.sort_by_key(|a| a.time);
        assert_eq!(parsed.events, oracle);
        let mags: Vec<f64> = parsed.events.iter().map(|e| e.magnitude).collect();
        assert_eq!(mags, vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_catalog("time,latitude,longitude,mag\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "depth"), "{err}");
    }

    #[test]
    fn bad_rows_are_counted() {
        let text = format!(
            "{HEADER}2001-01-01T00:00:00Z,33,-117,1,2.0,ml,ok\n\
             not-a-time,33,-117,1,2.0,ml,bad\n\
             2001-01-01T00:00:00Z,95,-117,1,2.0,ml,bad-lat\n\
             2001-01-01T00:00:00Z,33,-117,1,,ml,no-mag\n\
             2001-01-01T00:00:00Z,33\n\
             2001-01-01T00:00:00Z,33,-117,1,NaN,ml,nan\n"
        );
        let parsed = parse_catalog(text.as_bytes()).unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.skipped, 5);
        assert_eq!(parsed.total_rows(), 6);
    }

    #[test]
    fn negative_magnitude_clamped() {
        let text = format!("{HEADER}2001-01-01T00:00:00Z,33,-117,1,-0.4,ml,x\n");
        let parsed = parse_catalog(text.as_bytes()).unwrap();
        assert_eq!(parsed.events[0].magnitude, 0.0);
        assert_eq!(parsed.clamped, 1);
    }

    #[test]
    fn subseconds_truncated_and_offsets_normalized() {
        assert_eq!(
            ts("2019-07-06T03:19:53.999Z"),
            Utc.with_ymd_and_hms(2019, 7, 6, 3, 19, 53).unwrap()
        );
        assert_eq!(
            ts("2019-07-06T05:19:53+02:00"),
            Utc.with_ymd_and_hms(2019, 7, 6, 3, 19, 53).unwrap()
        );
        assert_eq!(
            ts("2019-07-06 03:19:53"),
            Utc.with_ymd_and_hms(2019, 7, 6, 3, 19, 53).unwrap()
        );
    }

    #[test]
    fn region_upper_edges_open() {
        let f = RegionFilter::southern_california();
        assert!(!f.contains(&event("2000-01-01T00:00:00Z", 36.0, -117.0)));
        assert!(f.contains(&event("2000-01-01T00:00:00Z", 32.0, -120.0)));
        assert!(!f.contains(&event("2000-01-01T00:00:00Z", 33.0, -114.0)));
        assert!(!f.contains(&event("2024-01-01T00:00:00Z", 33.0, -117.0)));
        assert!(f.contains(&event("1986-01-01T00:00:00Z", 33.0, -117.0)));
    }

    #[test]
    fn region_filter_brute_force() {
        let f = RegionFilter::new(
            (33.0, 34.0),
            (-118.0, -117.0),
            ts("2000-01-01T00:00:00Z"),
            ts("2001-01-01T00:00:00Z"),
        )
        .unwrap();
        let events = vec![
            event("2000-02-01T00:00:00Z", 33.5, -117.5),
            event("2000-02-02T00:00:00Z", 34.5, -117.5),
            event("2000-02-03T00:00:00Z", 33.1, -117.9),
            event("2000-02-04T00:00:00Z", 33.5, -116.5),
            event("2001-02-05T00:00:00Z", 33.5, -117.5),
            event("2000-02-06T00:00:00Z", 33.9, -117.1),
            event("1999-02-07T00:00:00Z", 33.5, -117.5),
            event("2000-02-08T00:00:00Z", 32.0, -117.5),
            event("2000-02-09T00:00:00Z", 33.0, -118.0),
            event("2000-02-10T00:00:00Z", 34.0, -117.5),
        ];
        let kept = filter_region(&events, &f);
        let oracle: Vec<_> = events
            .iter()
            .filter(|e| {
                e.latitude >= 33.0
                    && e.latitude < 34.0
                    && e.longitude >= -118.0
                    && e.longitude < -117.0
                    && e.time >= f.t_start
                    && e.time < f.t_end
            })
            .copied()
            .collect();
        assert_eq!(kept.len(), 4);
        assert_eq!(kept, oracle);
        assert_eq!(filter_region(&kept, &f), kept);
    }

    #[test]
    fn invalid_region_rejected() {
        let t0 = ts("2000-01-01T00:00:00Z");
        let t1 = ts("2001-01-01T00:00:00Z");
        assert!(RegionFilter::new((34.0, 33.0), (-118.0, -117.0), t0, t1).is_err());
        assert!(RegionFilter::new((33.0, 34.0), (-117.0, -117.0), t0, t1).is_err());
        assert!(RegionFilter::new((33.0, 34.0), (-118.0, -117.0), t1, t0).is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let events = vec![
            event("2000-02-01T00:00:00Z", 33.5, -117.5),
            event("2000-02-02T00:00:01Z", 34.123456789, -117.000001),
        ];
        let mut buf = Vec::new();
        write_catalog(&events, &mut buf).unwrap();
        let parsed = parse_catalog(buf.as_slice()).unwrap();
        assert_eq!(parsed.events, events);
    }
}
