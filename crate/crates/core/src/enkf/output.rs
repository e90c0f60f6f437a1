use std::path::Path;

use super::{mean_of, std_of, EnsembleRecord, Trajectory};
use crate::error::{Error, Result};
use crate::forcing::CONTROL_NAMES;
use crate::time::TimeBase;

fn finish<W: std::io::Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per cycle: window, member count, forecast/analysis mean and std of
/// every control, innovation statistics and window RMSEs.
pub fn write_diagnostics_csv<S>(records: &[EnsembleRecord<S>], path: impl AsRef<Path>, base: &TimeBase) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["cycle", "window_start", "window_end", "members", "n_obs"].map(String::from).to_vec();
    for stage in ["forecast", "analysis"] {
        for name in CONTROL_NAMES {
            header.push(format!("{stage}_{name}_mean"));
            header.push(format!("{stage}_{name}_std"));
        }
    }
    header.extend(["innovation_mean", "innovation_std", "forecast_rmse", "analysis_rmse"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.cycle.to_string(),
            base.format(r.window.0),
            base.format(r.window.1),
            r.members.len().to_string(),
            r.n_obs().to_string(),
        ];
        for xs in [&r.x_f, &r.x_a] {
            let (m, s) = (mean_of(xs), std_of(xs));
            for p in 0..m.len() {
                row.push(m[p].to_string());
                row.push(s[p].to_string());
            }
        }
        let (im, is) = r.innovation_stats();
        row.extend([im, is, r.forecast_rmse, r.analysis_rmse].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Analysed control evolution: `cycle,time,parameter,mean,std`, stamped at
/// each window's end.
pub fn write_controls_csv<S>(records: &[EnsembleRecord<S>], path: impl AsRef<Path>, base: &TimeBase) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cycle", "timestamp", "parameter", "mean", "std"])?;
    for r in records {
        let (m, s) = (mean_of(&r.x_a), std_of(&r.x_a));
        for (p, name) in CONTROL_NAMES.iter().enumerate() {
            w.write_record([
                r.cycle.to_string(),
                base.format(r.window.1),
                name.to_string(),
                m[p].to_string(),
                s[p].to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// Gauge levels of a trajectory as `timestamp,station,level`.
pub fn write_analysis_csv(
    traj: &Trajectory,
    stations: &[String],
    path: impl AsRef<Path>,
    base: &TimeBase,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "station", "level"])?;
    for (t, levels) in traj.times.iter().zip(&traj.levels) {
        for (name, v) in stations.iter().zip(levels) {
            w.write_record([base.format(*t), name.clone(), v.to_string()])?;
        }
    }
    finish(w, path)
}
