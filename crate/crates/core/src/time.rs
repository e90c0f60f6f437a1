//! Model time is seconds since an event origin; files carry ISO-8601 stamps.

use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};

use crate::error::{Error, Result};

pub const DEFAULT_ORIGIN: &str = "2021-01-01T00:00:00";

/// Maps model seconds to calendar timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBase {
    origin: NaiveDateTime,
}

impl Default for TimeBase {
    fn default() -> Self {
        TimeBase::parse(DEFAULT_ORIGIN).expect("valid default origin")
    }
}

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]`, with `T` or a space, optionally
/// followed by `Z` or a UTC offset (converted to UTC).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

impl TimeBase {
    pub fn new(origin: NaiveDateTime) -> Self {
        TimeBase { origin }
    }

    pub fn parse(origin: &str) -> Result<Self> {
        parse_timestamp(origin)
            .map(TimeBase::new)
            .ok_or_else(|| Error::Config(format!("bad ISO-8601 origin '{origin}'")))
    }

    pub fn origin(&self) -> NaiveDateTime {
        self.origin
    }

    pub fn seconds(&self, stamp: NaiveDateTime) -> f64 {
        let d = stamp - self.origin;
        d.num_milliseconds() as f64 / 1000.0
    }

    pub fn seconds_of(&self, stamp: &str) -> Option<f64> {
        parse_timestamp(stamp).map(|t| self.seconds(t))
    }

    /// Timestamp at millisecond resolution; whole seconds omit the fraction.
    pub fn format(&self, t: f64) -> String {
        let ms = (t * 1000.0).round() as i64;
        let stamp = self.origin + Duration::milliseconds(ms);
        if ms % 1000 == 0 {
            stamp.format("%Y-%m-%dT%H:%M:%S").to_string()
        } else {
            stamp.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
        }
    }
}

/// Two-column CSV (`timestamp,<name>`) with a header row. Returns the name
/// of the value column and the samples in model seconds. Timestamps must be
/// strictly increasing.
pub fn read_series_csv(path: impl AsRef<Path>, base: &TimeBase) -> Result<(String, Vec<(f64, f64)>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(&text, &path.display().to_string(), base)
}

pub fn parse_series_csv(text: &str, label: &str, base: &TimeBase) -> Result<(String, Vec<(f64, f64)>)> {
    let parse_err = |line: usize, msg: String| Error::Parse { path: label.to_owned(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.len() != 2 {
        return Err(parse_err(1, format!("expected 2 header columns, found {}", header.len())));
    }
    let name = header[1].to_owned();
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let t = base.seconds_of(&rec[0]).ok_or_else(|| parse_err(line, format!("bad timestamp '{}'", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad value '{}'", &rec[1])))?;
        if samples.last().is_some_and(|&(prev, _)| t <= prev) {
            return Err(Error::NonMonotonic { path: label.to_owned(), line });
        }
        samples.push((t, v));
    }
    Ok((name, samples))
}

pub fn write_series_csv(
    path: impl AsRef<Path>,
    name: &str,
    samples: impl IntoIterator<Item = (f64, f64)>,
    base: &TimeBase,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", name])?;
    for (t, v) in samples {
        w.write_record([base.format(t), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_csv_round_trip() {
        let tb = TimeBase::default();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        let samples = vec![(0.0, 250.0), (900.0, 251.5), (1800.0, 1.0 / 3.0)];
        write_series_csv(&p, "discharge", samples.clone(), &tb).unwrap();
        let (name, back) = read_series_csv(&p, &tb).unwrap();
        assert_eq!(name, "discharge");
        assert_eq!(back, samples);
    }

    #[test]
    fn series_csv_errors_carry_line_numbers() {
        let tb = TimeBase::default();
        let bad = "timestamp,x\n2021-01-01T00:00:00,1\n2021-01-01T00:15:00,oops\n";
        assert!(matches!(parse_series_csv(bad, "f", &tb), Err(Error::Parse { line: 3, .. })));
        let order = "timestamp,x\n2021-01-01T00:15:00,1\n2021-01-01T00:00:00,2\n";
        assert!(matches!(parse_series_csv(order, "f", &tb), Err(Error::NonMonotonic { line: 3, .. })));
    }

    #[test]
    fn round_trip_seconds() {
        let tb = TimeBase::default();
        for t in [0.0, 900.0, 86_400.0 * 30.0, 12.5, -3600.0] {
            let s = tb.format(t);
            assert_eq!(tb.seconds_of(&s), Some(t), "{s}");
        }
        assert_eq!(tb.format(900.0), "2021-01-01T00:15:00");
    }

    #[test]
    fn accepted_forms() {
        let tb = TimeBase::default();
        assert_eq!(tb.seconds_of("2021-01-01 01:00:00"), Some(3600.0));
        assert_eq!(tb.seconds_of("2021-01-01T01:00:00Z"), Some(3600.0));
        assert_eq!(tb.seconds_of("2021-01-01T02:00:00+01:00"), Some(3600.0));
        assert_eq!(tb.seconds_of("2021-01-01T01:00"), Some(3600.0));
        assert_eq!(tb.seconds_of("yesterday"), None);
    }
}
