//! Built-in synthetic reach: a sloping single-thread channel in three
//! friction segments, flanked by a floodplain that rises away from the
//! banks, with a gauge in each channel segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BoundaryDriver, BoundarySegment, Catchment, FrictionZoning, GaugeStation, Hydrograph, InflowSplit, RatingCurve,
    Side, ZONE_COUNT,
};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Single flood wave on top of a steady base flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloodEvent {
    pub duration_hours: f64,
    pub base_flow: f64,
    /// Peak discharge as a multiple of the base flow.
    pub peak_ratio: f64,
    pub rise_start_hours: f64,
    pub rise_hours: f64,
    pub recession_hours: f64,
    /// Sampling interval of the generated hydrograph, s.
    pub cadence: f64,
}

impl Default for FloodEvent {
    fn default() -> Self {
        FloodEvent {
            duration_hours: 30.0 * 24.0,
            base_flow: 250.0,
            peak_ratio: 3.0,
            rise_start_hours: 12.0 * 24.0,
            rise_hours: 72.0,
            recession_hours: 144.0,
            cadence: 900.0,
        }
    }
}

impl FloodEvent {
    /// A four-day event with the same shape, for quick twin experiments:
    /// one quasi-stationary day, a one-day rise and a day and a half of recession.
    pub fn short() -> Self {
        FloodEvent {
            duration_hours: 96.0,
            rise_start_hours: 24.0,
            rise_hours: 24.0,
            recession_hours: 36.0,
            ..FloodEvent::default()
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration_hours * 3600.0
    }

    pub fn peak_time(&self) -> f64 {
        (self.rise_start_hours + self.rise_hours) * 3600.0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.duration_hours > 0.0
            && self.base_flow > 0.0
            && self.peak_ratio >= 1.0
            && self.rise_start_hours >= 0.0
            && self.rise_hours > 0.0
            && self.recession_hours > 0.0
            && self.cadence > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid flood event {self:?}")));
        }
        Ok(())
    }

    pub fn discharge(&self, t: f64) -> f64 {
        let base = self.base_flow;
        let amp = base * (self.peak_ratio - 1.0);
        let t0 = self.rise_start_hours * 3600.0;
        let tp = self.peak_time();
        let tr = self.recession_hours * 3600.0;
        let pi = std::f64::consts::PI;
        if t <= t0 || t >= tp + tr {
            base
        } else if t <= tp {
            base + amp * 0.5 * (1.0 - (pi * (t - t0) / (tp - t0)).cos())
        } else {
            base + amp * 0.5 * (1.0 + (pi * (t - tp) / tr).cos())
        }
    }

    pub fn hydrograph(&self) -> Result<Hydrograph> {
        self.validate()?;
        let n = (self.duration() / self.cadence).ceil() as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 * self.cadence;
                (t, self.discharge(t))
            })
            .collect();
        Hydrograph::new(samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    /// Longitudinal bed slope, m/m.
    pub slope: f64,
    /// Channel bed elevation at the outlet, m.
    pub outlet_bed: f64,
    /// Floodplain height above the channel bed at the bank, m.
    pub bank_height: f64,
    /// Floodplain rise per cell away from the channel, m.
    pub lateral_rise: f64,
    /// Amplitude of the seeded floodplain micro-relief, m.
    pub relief: f64,
    pub seed: u64,
    pub ks: [f64; ZONE_COUNT],
    pub split: InflowSplit,
    /// Grid refinement factor (2 gives a twice finer grid over the same reach).
    pub refine: usize,
    pub event: FloodEvent,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            nx: 20,
            ny: 7,
            cell_size: 500.0,
            slope: 2e-4,
            outlet_bed: 10.0,
            bank_height: 1.2,
            lateral_rise: 0.15,
            relief: 0.05,
            seed: 7,
            ks: [17.0, 45.0, 38.0, 40.0],
            split: InflowSplit::Conveyance,
            refine: 1,
            event: FloodEvent::default(),
        }
    }
}

pub const STATION_NAMES: [&str; 3] = ["upstream", "middle", "downstream"];

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.nx < 6 || self.ny < 3 || self.ny.is_multiple_of(2) {
            return Err(Error::Config("synthetic reach needs nx >= 6 and an odd ny >= 3".into()));
        }
        if !(self.cell_size > 0.0 && self.slope > 0.0 && self.bank_height > 0.0 && self.lateral_rise >= 0.0) {
            return Err(Error::Config("synthetic reach geometry must be positive".into()));
        }
        if self.refine == 0 {
            return Err(Error::Config("refine must be at least 1".into()));
        }
        self.event.validate()
    }

    fn length(&self) -> f64 {
        self.nx as f64 * self.cell_size
    }

    fn channel_bed(&self, x: f64) -> f64 {
        self.outlet_bed + self.slope * (self.length() - x)
    }

    fn in_channel(&self, y: f64) -> bool {
        let yc = 0.5 * self.ny as f64 * self.cell_size;
        (y - yc).abs() < 0.5 * self.cell_size
    }

    fn bed(&self, x: f64, y: f64, relief: &[f64]) -> f64 {
        let zc = self.channel_bed(x);
        if self.in_channel(y) {
            return zc;
        }
        let yc = 0.5 * self.ny as f64 * self.cell_size;
        let away = ((y - yc).abs() - 0.5 * self.cell_size) / self.cell_size;
        // Relief is drawn per coarse cell so refined grids see the same terrain.
        let ci = ((x / self.cell_size) as usize).min(self.nx - 1);
        let cj = ((y / self.cell_size) as usize).min(self.ny - 1);
        zc + self.bank_height + self.lateral_rise * away + relief[cj * self.nx + ci]
    }

    fn zone(&self, x: f64, y: f64) -> u8 {
        if !self.in_channel(y) {
            return 0;
        }
        let third = self.length() / 3.0;
        1 + ((x / third) as u8).min(2)
    }

    /// Normal-flow rating of the outlet cross-section under the default zone values.
    fn outlet_rating(&self, grid: &GridSpec, zones: &[u8]) -> Result<RatingCurve> {
        let i = grid.nx - 1;
        let section: Vec<(f64, f64)> = (0..grid.ny)
            .map(|j| {
                let k = grid.idx(i, j);
                (grid.bottom_elevation[k], self.ks[zones[k] as usize])
            })
            .collect();
        let z_min = section.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let sqrt_s = self.slope.sqrt();
        let width = grid.dy;
        let conveyance = |zs: f64| -> f64 {
            section
                .iter()
                .map(|&(zb, ks)| {
                    let d = (zs - zb).max(0.0);
                    ks * width * d * d.cbrt().powi(2) * sqrt_s
                })
                .sum()
        };
        let step = 0.05;
        let points = (0..=300).map(|k| {
            let zs = z_min + k as f64 * step;
            (zs, conveyance(zs))
        });
        RatingCurve::table(points.collect())
    }
}

/// Builds the synthetic reach. The result is a pure function of `spec`.
pub fn make_synthetic_catchment(spec: &SyntheticSpec) -> Result<Catchment> {
    spec.validate()?;
    let r = spec.refine;
    let (nx, ny) = (spec.nx * r, spec.ny * r);
    let dx = spec.cell_size / r as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let relief: Vec<f64> = (0..spec.nx * spec.ny).map(|_| spec.relief * (2.0 * rng.random::<f64>() - 1.0)).collect();

    let mut bed = vec![0.0; nx * ny];
    let mut zones = vec![0u8; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = ((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx);
            bed[j * nx + i] = spec.bed(x, y, &relief);
            zones[j * nx + i] = spec.zone(x, y);
        }
    }
    let grid = GridSpec::new(nx, ny, dx, dx, 0.0, 0.0, bed)?;
    let rating = spec.outlet_rating(&grid, &zones)?;
    let zoning = FrictionZoning::new(zones, spec.ks)?;

    let boundary = BoundaryDriver::new(
        BoundarySegment::whole(Side::West, &grid),
        spec.event.hydrograph()?,
        spec.split,
        BoundarySegment::whole(Side::East, &grid),
        rating,
    );

    let yc = 0.5 * spec.ny as f64 * spec.cell_size;
    let length = spec.length();
    let gauges = [1.0 / 6.0, 0.5, 5.0 / 6.0]
        .iter()
        .zip(STATION_NAMES)
        .map(|(&frac, name)| {
            let (i, j) = grid.locate(frac * length, yc).expect("gauge inside reach");
            let datum = grid.bottom_elevation[grid.idx(i, j)];
            GaugeStation::new(name, (i, j), datum)
        })
        .collect();

    let catchment = Catchment { grid, zoning, boundary, gauges };
    catchment.validate()?;
    Ok(catchment)
}
