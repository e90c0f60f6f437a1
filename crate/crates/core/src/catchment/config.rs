//! TOML catchment description. Relative paths resolve against the
//! directory holding the config file.
//!
//! ```toml
//! grid = "bed.asc"            # bottom elevation, ESRI ASCII
//! zones = "zones.asc"         # zone index per cell (0..=3)
//! ks = [17.0, 45.0, 38.0, 40.0]
//! hydrograph = "inflow.csv"   # timestamp,discharge
//! start = "2021-01-01T00:00:00"
//! split = "conveyance"        # or "uniform"
//!
//! [rating]
//! kind = "power_law"
//! alpha = 100.0
//! h0 = 10.0
//! beta = 1.5
//!
//! [upstream]
//! side = "west"               # positions default to the whole edge
//! [downstream]
//! side = "east"
//!
//! [[gauges]]
//! name = "middle"
//! col = 10
//! row = 3
//! datum = 0.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    BoundaryDriver, BoundarySegment, Catchment, FrictionZoning, GaugeStation, Hydrograph, InflowSplit, RatingCurve,
    Side,
};
use crate::error::{Error, Result};
use crate::esri::AsciiGrid;
use crate::grid::GridSpec;
use crate::time::{read_series_csv, TimeBase, DEFAULT_ORIGIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub side: Side,
    #[serde(default)]
    pub positions: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub name: String,
    pub col: usize,
    /// Row counted from the south edge.
    pub row: usize,
    #[serde(default)]
    pub datum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatchmentConfig {
    pub grid: PathBuf,
    pub zones: PathBuf,
    pub ks: [f64; 4],
    pub hydrograph: PathBuf,
    #[serde(default = "default_start")]
    pub start: String,
    #[serde(default)]
    pub split: InflowSplit,
    pub rating: RatingCurve,
    pub upstream: EdgeConfig,
    pub downstream: EdgeConfig,
    #[serde(default)]
    pub gauges: Vec<GaugeConfig>,
}

fn default_start() -> String {
    DEFAULT_ORIGIN.to_owned()
}

impl CatchmentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn time_base(&self) -> Result<TimeBase> {
        TimeBase::parse(&self.start)
    }

    /// Loads the referenced files and assembles a validated catchment.
    pub fn build(&self, base_dir: &Path) -> Result<Catchment> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let grid = GridSpec::from_ascii(resolve(&self.grid))?;

        let zone_grid = AsciiGrid::read(resolve(&self.zones))?;
        if zone_grid.ncols != grid.nx || zone_grid.nrows != grid.ny {
            return Err(Error::Shape(format!(
                "zone map is {}x{}, grid is {}x{}",
                zone_grid.ncols, zone_grid.nrows, grid.nx, grid.ny
            )));
        }
        let zone_id = zone_grid
            .data
            .iter()
            .map(|&z| {
                if z.fract() == 0.0 && (0.0..4.0).contains(&z) {
                    Ok(z as u8)
                } else {
                    Err(Error::Config(format!("zone map value {z} is not one of 0, 1, 2, 3")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        let zoning = FrictionZoning::new(zone_id, self.ks)?;

        let (_, samples) = read_series_csv(resolve(&self.hydrograph), &self.time_base()?)?;
        let hydrograph = Hydrograph::new(samples)?;

        let segment = |e: &EdgeConfig| match &e.positions {
            Some(p) => BoundarySegment { side: e.side, positions: p.clone() },
            None => BoundarySegment::whole(e.side, &grid),
        };
        let boundary = BoundaryDriver::new(
            segment(&self.upstream),
            hydrograph,
            self.split,
            segment(&self.downstream),
            self.rating.clone(),
        );
        let gauges = self.gauges.iter().map(|g| GaugeStation::new(&g.name, (g.col, g.row), g.datum)).collect();

        let catchment = Catchment { grid, zoning, boundary, gauges };
        catchment.validate()?;
        Ok(catchment)
    }
}

pub fn load_catchment(path: impl AsRef<Path>) -> Result<(Catchment, TimeBase)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = CatchmentConfig::parse(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok((cfg.build(dir)?, cfg.time_base()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::write_series_csv;

    #[test]
    fn loads_a_small_catchment() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let grid = GridSpec::new(4, 3, 10.0, 10.0, 0.0, 0.0, (0..12).map(|k| k as f64 * 0.1).collect()).unwrap();
        grid.to_ascii(&grid.bottom_elevation).unwrap().write(d.join("bed.asc")).unwrap();
        let zones: Vec<f64> = (0..12).map(|k| (k % 4) as f64).collect();
        grid.to_ascii(&zones).unwrap().write(d.join("zones.asc")).unwrap();
        let tb = TimeBase::default();
        write_series_csv(d.join("q.csv"), "discharge", [(0.0, 5.0), (3600.0, 15.0)], &tb).unwrap();
        let toml = r#"
grid = "bed.asc"
zones = "zones.asc"
ks = [17.0, 45.0, 38.0, 40.0]
hydrograph = "q.csv"

[rating]
kind = "power_law"
alpha = 100.0
h0 = 0.0
beta = 1.5

[upstream]
side = "west"
[downstream]
side = "east"
positions = [1]

[[gauges]]
name = "g"
col = 2
row = 1
"#;
        std::fs::write(d.join("c.toml"), toml).unwrap();
        let (c, _) = load_catchment(d.join("c.toml")).unwrap();
        assert_eq!(c.grid, grid);
        assert_eq!(c.zoning.zone_id[5], 1);
        assert_eq!(c.zoning.field().ks[3], 40.0);
        assert_eq!(c.boundary.hydrograph.at(1800.0), 10.0);
        assert_eq!(c.boundary.downstream.positions, vec![1]);
        assert_eq!(c.boundary.upstream.positions, vec![0, 1, 2]);
        assert_eq!(c.gauges[0].cell, (2, 1));

        let bad = toml.replace("row = 1", "row = 9");
        std::fs::write(d.join("bad.toml"), bad).unwrap();
        assert!(matches!(load_catchment(d.join("bad.toml")), Err(Error::Config(_))));
    }
}
