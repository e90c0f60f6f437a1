//! Gauge series, bias diagnosis and point-validation metrics.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{read_series_csv, write_series_csv, TimeBase};

/// Default gauge cadence, s.
pub const GAUGE_CADENCE: f64 = 900.0;
/// Level standard deviation above which a bias window is flagged as non-stationary, m.
pub const STATIONARITY_LIMIT: f64 = 0.05;

/// Water levels at one station, times in model seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSeries {
    pub station: String,
    samples: Vec<(f64, f64)>,
}

impl GaugeSeries {
    pub fn new(station: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("gauge timestamps must be strictly increasing".into()));
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::Config("gauge samples must be finite".into()));
        }
        Ok(GaugeSeries { station: station.into(), samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    /// Same series with every level shifted by `-offset`.
    pub fn minus(&self, offset: f64) -> GaugeSeries {
        GaugeSeries {
            station: self.station.clone(),
            samples: self.samples.iter().map(|&(t, v)| (t, v - offset)).collect(),
        }
    }

    pub fn in_window(&self, window: Window) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().copied().filter(move |s| window.contains(s.0))
    }
}

/// Closed time interval `[t0, t1]`, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    pub fn new(t0: f64, t1: f64) -> Self {
        Window { t0, t1 }
    }

    pub fn all() -> Self {
        Window { t0: f64::NEG_INFINITY, t1: f64::INFINITY }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }
}

fn snap(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

/// Pairs `(sim, obs)` at timestamps present in both series (compared at
/// millisecond resolution) inside `window`.
pub fn common_pairs(sim: &GaugeSeries, obs: &GaugeSeries, window: Window) -> Vec<(f64, f64)> {
    let (a, b) = (&sim.samples, &obs.samples);
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let (ta, tb) = (snap(a[i].0), snap(b[j].0));
        match ta.cmp(&tb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if window.contains(b[j].0) {
                    out.push((a[i].1, b[j].1));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub station: String,
    /// Mean of model minus observation, m.
    pub bias: f64,
    pub window: Window,
    pub count: usize,
    /// Standard deviation of the observed level inside the window, m.
    pub level_std: f64,
}

impl BiasEstimate {
    pub fn non_stationary(&self) -> bool {
        self.level_std > STATIONARITY_LIMIT
    }
}

pub fn diagnose_bias(model: &GaugeSeries, obs: &GaugeSeries, window: Window) -> Result<BiasEstimate> {
    let pairs = common_pairs(model, obs, window);
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = pairs.len() as f64;
    let bias = pairs.iter().map(|(m, o)| m - o).sum::<f64>() / n;
    let mean_obs = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let level_std = (pairs.iter().map(|p| (p.1 - mean_obs).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BiasEstimate { station: obs.station.clone(), bias, window, count: pairs.len(), level_std })
}

pub fn rmse(sim: &GaugeSeries, obs: &GaugeSeries, window: Window) -> Result<f64> {
    let pairs = common_pairs(sim, obs, window);
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok((pairs.iter().map(|(s, o)| (s - o).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt())
}

pub fn max_abs_error(sim: &GaugeSeries, obs: &GaugeSeries, window: Window) -> Result<f64> {
    let pairs = common_pairs(sim, obs, window);
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(pairs.iter().map(|(s, o)| (s - o).abs()).fold(0.0, f64::max))
}

pub fn load_gauge_csv(path: impl AsRef<Path>, base: &TimeBase) -> Result<GaugeSeries> {
    let (station, samples) = read_series_csv(path, base)?;
    Ok(GaugeSeries { station, samples })
}

pub fn write_gauge_csv(series: &GaugeSeries, path: impl AsRef<Path>, base: &TimeBase) -> Result<()> {
    write_series_csv(path, &series.station, series.samples.iter().copied(), base)
}

/// Long-format table `timestamp,station,level`, rows ordered by station then time.
pub fn write_levels_csv(series: &[GaugeSeries], path: impl AsRef<Path>, base: &TimeBase) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "station", "level"])?;
    for s in series {
        for &(t, v) in &s.samples {
            w.write_record([base.format(t), s.station.clone(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a long-format table; stations keep their order of first appearance.
pub fn read_levels_csv(path: impl AsRef<Path>, base: &TimeBase) -> Result<Vec<GaugeSeries>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse { path: label.clone(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp", "station", "level"] {
        return Err(parse_err(1, "expected header timestamp,station,level".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_station: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let t = base.seconds_of(&rec[0]).ok_or_else(|| parse_err(line, format!("bad timestamp '{}'", &rec[0])))?;
        let v: f64 = rec[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad level '{}'", &rec[2])))?;
        let name = rec[1].to_owned();
        let entry = by_station.entry(name.clone()).or_insert_with(|| {
            order.push(name);
            Vec::new()
        });
        if entry.last().is_some_and(|&(prev, _)| t <= prev) {
            return Err(Error::NonMonotonic { path: label.clone(), line });
        }
        entry.push((t, v));
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let samples = by_station.remove(&name).unwrap_or_default();
            GaugeSeries { station: name, samples }
        })
        .collect())
}

/// One row of the point-metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMetrics {
    pub experiment: String,
    pub station: String,
    pub rmse: f64,
    pub max_abs_error: f64,
}

pub fn station_metrics(
    experiment: &str,
    sim: &[GaugeSeries],
    obs: &[GaugeSeries],
    window: Window,
) -> Result<Vec<StationMetrics>> {
    obs.iter()
        .map(|o| {
            let s = sim
                .iter()
                .find(|s| s.station == o.station)
                .ok_or_else(|| Error::Config(format!("no simulated series for station '{}'", o.station)))?;
            Ok(StationMetrics {
                experiment: experiment.to_owned(),
                station: o.station.clone(),
                rmse: rmse(s, o, window)?,
                max_abs_error: max_abs_error(s, o, window)?,
            })
        })
        .collect()
}

pub fn write_metrics_csv(rows: &[StationMetrics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<StationMetrics>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
