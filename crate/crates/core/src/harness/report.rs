use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentReport, Mode, Scenario};
use crate::enkf::{write_controls_csv, write_diagnostics_csv};
use crate::error::{Error, Result};
use crate::flood_extent::write_raster;
use crate::gauges::{write_levels_csv, write_metrics_csv, StationMetrics};
use crate::time::TimeBase;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn map_name(t: f64) -> String {
    format!("flood_{:04}h.asc", (t / 3600.0).round() as i64)
}

/// One row of `csi.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiRow {
    pub experiment: String,
    pub timestamp: String,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Empty when both maps are dry.
    pub csi: Option<f64>,
}

pub fn read_csi_csv(path: impl AsRef<Path>) -> Result<Vec<CsiRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn metadata(config: &ExperimentConfig, scenario: &Scenario, report: Option<&ExperimentReport>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "floodda {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "experiment = {}", config.name);
    let _ = writeln!(s, "seed = {}", config.seed);
    let _ = writeln!(s, "grid = {} x {} cells", scenario.catchment.grid.nx, scenario.catchment.grid.ny);
    let _ =
        writeln!(s, "truth grid = {} x {} cells", scenario.truth_catchment.grid.nx, scenario.truth_catchment.grid.ny);
    for b in &scenario.bias {
        let flag = if b.non_stationary() { " (non-stationary window)" } else { "" };
        let _ = writeln!(s, "bias {} = {} m over {} samples{flag}", b.station, b.bias, b.count);
    }
    if let Some(r) = report {
        let _ = writeln!(s, "cycles = {}", r.cycles.len());
        for (member, cycle) in &r.dropped {
            let _ = writeln!(s, "dropped member {member} in cycle {cycle}");
        }
    }
    let _ = writeln!(s, "\n[config]\n{}", config.to_toml());
    s
}

/// Writes the truth artifacts: clean and observed gauge levels, diagnosed
/// bias, reference flood maps and run metadata.
pub fn write_truth(
    config: &ExperimentConfig,
    scenario: &Scenario,
    dir: impl AsRef<Path>,
    base: &TimeBase,
) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    write_levels_csv(&scenario.truth.levels, dir.join("truth_levels.csv"), base)?;
    write_levels_csv(&scenario.observations, dir.join("observations.csv"), base)?;
    let path = dir.join("bias.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["station", "bias", "window_start", "window_end", "samples", "level_std"])?;
    for b in &scenario.bias {
        w.write_record([
            b.station.clone(),
            b.bias.to_string(),
            base.format(b.window.t0),
            base.format(b.window.t1),
            b.count.to_string(),
            b.level_std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    for (t, map) in scenario.truth.overpasses.iter().zip(&scenario.truth.reference_maps) {
        write_raster(map, dir.join(format!("reference_{}", map_name(*t))))?;
    }
    write_text(&dir.join("run_metadata.txt"), &metadata(config, scenario, None))
}

/// Writes every output of one experiment into `dir`. Wall-clock timings go to
/// `timings.txt` so that all other files are reproducible byte for byte.
pub fn write_report(
    report: &ExperimentReport,
    scenario: &Scenario,
    dir: impl AsRef<Path>,
    base: &TimeBase,
) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let name = &report.config.name;
    write_metrics_csv(&report.metrics, dir.join("metrics.csv"))?;
    write_levels_csv(&report.series, dir.join("levels.csv"), base)?;
    let csi: Vec<CsiRow> = report
        .csi
        .iter()
        .map(|s| CsiRow {
            experiment: name.clone(),
            timestamp: base.format(s.time),
            tp: s.tp,
            fp: s.fp,
            tn: s.tn,
            fn_: s.fn_,
            csi: s.csi,
        })
        .collect();
    write_csv(&csi, &dir.join("csi.csv"))?;

    let mut w = csv::Writer::from_path(dir.join("boxes.csv"))?;
    w.write_record(["timestamp", "box", "model_wet", "reference_wet"])?;
    for b in &report.boxes {
        w.write_record([base.format(b.time), b.box_id.clone(), b.model.to_string(), b.reference.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    if report.config.mode == Mode::Da {
        write_controls_csv(&report.cycles, dir.join("controls.csv"), base)?;
        write_diagnostics_csv(&report.cycles, dir.join("diagnostics.csv"), base)?;
    }
    for (t, map) in scenario.truth.overpasses.iter().zip(&report.maps) {
        write_raster(map, dir.join(map_name(*t)))?;
    }
    write_text(&dir.join("run_metadata.txt"), &metadata(&report.config, scenario, Some(report)))?;
    write_text(&dir.join("timings.txt"), &format!("{name} {:.3} s\n", report.elapsed))
}

/// A ranked entry of a summary table. Ranks are dense: equal scores share a
/// rank and the next distinct score takes the following integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub metric: String,
    /// Station name or overpass timestamp.
    pub key: String,
    pub experiment: String,
    pub value: f64,
    pub rank: usize,
    /// `best`, `second` or empty.
    pub mark: String,
}

fn rank_group(metric: &str, key: &str, mut entries: Vec<(String, f64)>, lower_is_better: bool) -> Vec<RankRow> {
    entries.sort_by(|a, b| {
        let by_value = if lower_is_better { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) };
        by_value.then_with(|| a.0.cmp(&b.0))
    });
    let mut rows: Vec<RankRow> = Vec::with_capacity(entries.len());
    for (experiment, value) in entries {
        let rank = match rows.last() {
            Some(prev) if prev.value == value => prev.rank,
            Some(prev) => prev.rank + 1,
            None => 1,
        };
        let mark = match rank {
            1 => "best",
            2 => "second",
            _ => "",
        };
        rows.push(RankRow { metric: metric.into(), key: key.into(), experiment, value, rank, mark: mark.into() });
    }
    rows
}

/// Ranks experiments per station on RMSE and maximum error (lower is
/// better) and per overpass on CSI (higher is better). Ties share the better
/// rank and are listed by experiment name. Undefined CSI values are skipped.
pub fn compare_experiments(metrics: &[StationMetrics], csi: &[CsiRow]) -> Result<Vec<RankRow>> {
    let mut experiments: Vec<&str> = metrics.iter().map(|m| m.experiment.as_str()).collect();
    experiments.sort_unstable();
    experiments.dedup();
    if experiments.len() < 2 {
        return Err(Error::Config(format!("need at least two experiments to compare, got {}", experiments.len())));
    }
    let mut stations: BTreeMap<&str, Vec<&StationMetrics>> = BTreeMap::new();
    for m in metrics {
        stations.entry(m.station.as_str()).or_default().push(m);
    }
    for (station, rows) in &stations {
        if rows.len() != experiments.len() {
            return Err(Error::Config(format!("station '{station}' is not reported by every experiment")));
        }
    }

    let mut out = Vec::new();
    for (metric, pick) in [("rmse", 0), ("max_abs_error", 1)] {
        for (station, rows) in &stations {
            let entries =
                rows.iter().map(|m| (m.experiment.clone(), if pick == 0 { m.rmse } else { m.max_abs_error })).collect();
            out.extend(rank_group(metric, station, entries, true));
        }
    }
    let mut overpasses: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
    for row in csi {
        let group = overpasses.entry(row.timestamp.as_str()).or_default();
        if let Some(v) = row.csi {
            group.push((row.experiment.clone(), v));
        }
    }
    for (stamp, entries) in overpasses {
        out.extend(rank_group("csi", stamp, entries, false));
    }
    Ok(out)
}

pub fn write_comparison_csv(rows: &[RankRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(exp: &str, station: &str, rmse: f64) -> StationMetrics {
        StationMetrics { experiment: exp.into(), station: station.into(), rmse, max_abs_error: 2.0 * rmse }
    }

    fn ranks<'a>(rows: &'a [RankRow], metric: &str, key: &str) -> Vec<(&'a str, usize, &'a str)> {
        rows.iter()
            .filter(|r| r.metric == metric && r.key == key)
            .map(|r| (r.experiment.as_str(), r.rank, r.mark.as_str()))
            .collect()
    }

    #[test]
    fn two_experiments_argmin() {
        let rows = compare_experiments(&[m("FR1", "s", 0.5), m("DA2", "s", 0.1)], &[]).unwrap();
        assert_eq!(ranks(&rows, "rmse", "s"), [("DA2", 1, "best"), ("FR1", 2, "second")]);
    }

    #[test]
    fn ties_share_best_and_sort_by_name() {
        let rows = compare_experiments(&[m("DA4", "s", 0.2), m("DA2", "s", 0.2), m("DA1", "s", 0.3)], &[]).unwrap();
        assert_eq!(ranks(&rows, "rmse", "s"), [("DA2", 1, "best"), ("DA4", 1, "best"), ("DA1", 2, "second")]);
    }

    #[test]
    fn hand_ranking_of_three() {
        let metrics = [m("A", "s", 0.3), m("B", "s", 0.1), m("C", "s", 0.2)];
        let csi = |e: &str, v: f64| CsiRow {
            experiment: e.into(),
            timestamp: "t".into(),
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            csi: Some(v),
        };
        let rows = compare_experiments(&metrics, &[csi("A", 0.9), csi("B", 0.7), csi("C", 0.8)]).unwrap();
        assert_eq!(ranks(&rows, "rmse", "s"), [("B", 1, "best"), ("C", 2, "second"), ("A", 3, "")]);
        assert_eq!(ranks(&rows, "csi", "t"), [("A", 1, "best"), ("C", 2, "second"), ("B", 3, "")]);
    }

    #[test]
    fn needs_common_stations() {
        assert!(compare_experiments(&[m("A", "s", 0.1)], &[]).is_err());
        assert!(compare_experiments(&[m("A", "s", 0.1), m("B", "t", 0.1)], &[]).is_err());
    }
}
