//! Catchment configuration: friction zones, boundary conditions, gauges,
//! restart files and the built-in synthetic reach.

mod boundary;
mod config;
mod hydrograph;
mod rating;
mod restart;
mod synthetic;

pub use boundary::{BoundaryDriver, BoundarySegment, InflowSplit, Side};
pub use config::{load_catchment, CatchmentConfig, EdgeConfig, GaugeConfig};
pub use hydrograph::{inflow_at, Hydrograph};
pub use rating::RatingCurve;
pub use restart::{load_restart, read_restart, save_restart, write_restart};
pub use synthetic::{make_synthetic_catchment, FloodEvent, SyntheticSpec, STATION_NAMES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrictionField, GridSpec};

pub const ZONE_COUNT: usize = 4;

/// Four-zone Strickler map: zone 0 is the floodplain, zones 1–3 the river bed
/// from upstream to downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionZoning {
    pub zone_id: Vec<u8>,
    pub ks: [f64; ZONE_COUNT],
}

impl FrictionZoning {
    pub fn new(zone_id: Vec<u8>, ks: [f64; ZONE_COUNT]) -> Result<Self> {
        if let Some(z) = zone_id.iter().find(|&&z| z as usize >= ZONE_COUNT) {
            return Err(Error::Config(format!("zone index {z} outside 0..{ZONE_COUNT}")));
        }
        if ks.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Config(format!("zone Strickler values must be positive, got {ks:?}")));
        }
        Ok(FrictionZoning { zone_id, ks })
    }

    pub fn field(&self) -> FrictionField {
        self.field_with(&self.ks)
    }

    /// Per-cell field using the given zone values instead of the defaults.
    pub fn field_with(&self, ks: &[f64; ZONE_COUNT]) -> FrictionField {
        FrictionField { ks: self.zone_id.iter().map(|&z| ks[z as usize]).collect() }
    }

    pub fn cells_in_zone(&self, zone: u8) -> usize {
        self.zone_id.iter().filter(|&&z| z == zone).count()
    }
}

/// A water-level gauge at one grid cell. Reported level is
/// `bottom + depth - datum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeStation {
    pub name: String,
    pub cell: (usize, usize),
    #[serde(default)]
    pub datum: f64,
}

impl GaugeStation {
    pub fn new(name: impl Into<String>, cell: (usize, usize), datum: f64) -> Self {
        GaugeStation { name: name.into(), cell, datum }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.cell.0 >= grid.nx || self.cell.1 >= grid.ny {
            return Err(Error::Config(format!("gauge '{}' cell {:?} outside the grid", self.name, self.cell)));
        }
        Ok(())
    }
}

/// Everything needed to run the hydraulic model over a reach.
#[derive(Debug, Clone, PartialEq)]
pub struct Catchment {
    pub grid: GridSpec,
    pub zoning: FrictionZoning,
    pub boundary: BoundaryDriver,
    pub gauges: Vec<GaugeStation>,
}

impl Catchment {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.zoning.zone_id.len() != self.grid.len() {
            return Err(Error::Shape("zone map does not match grid".into()));
        }
        self.boundary.validate(&self.grid)?;
        for g in &self.gauges {
            g.validate(&self.grid)?;
        }
        Ok(())
    }

    pub fn station_names(&self) -> Vec<String> {
        self.gauges.iter().map(|g| g.name.clone()).collect()
    }
}
