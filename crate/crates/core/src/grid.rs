//! Structured grid, hydraulic state and physical constants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esri::AsciiGrid;

/// Rectangular cell-centred grid with a bottom elevation per cell.
///
/// Cells are indexed `(i, j)` with `i` along `x` (east) and `j` along `y`
/// (north); storage is row-major, `idx = j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
    pub bottom_elevation: Vec<f64>,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64, bottom_elevation: Vec<f64>) -> Result<Self> {
        let grid = GridSpec { nx, ny, dx, dy, x0, y0, bottom_elevation };
        grid.validate()?;
        Ok(grid)
    }

    /// Flat-bottomed grid at elevation zero.
    pub fn flat(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        Self::new(nx, ny, dx, dy, 0.0, 0.0, vec![0.0; nx * ny])
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("grid needs at least one cell in each direction".into()));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return Err(Error::Config(format!("cell sizes must be positive, got dx={} dy={}", self.dx, self.dy)));
        }
        if self.bottom_elevation.len() != self.nx * self.ny {
            return Err(Error::Shape(format!(
                "bottom elevation has {} values for a {}x{} grid",
                self.bottom_elevation.len(),
                self.nx,
                self.ny
            )));
        }
        if self.bottom_elevation.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("bottom elevation must be finite everywhere".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + (i as f64 + 0.5) * self.dx, self.y0 + (j as f64 + 0.5) * self.dy)
    }

    /// Cell containing the point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = (x - self.x0) / self.dx;
        let fj = (y - self.y0) / self.dy;
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        let (i, j) = (fi.floor() as usize, fj.floor() as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Reads the bottom elevation from an ESRI ASCII grid. Square cells only.
    pub fn from_ascii(path: impl AsRef<Path>) -> Result<Self> {
        let g = AsciiGrid::read(path)?;
        if g.data.iter().any(|&v| g.is_nodata(v)) {
            return Err(Error::Config("bottom elevation grid contains NODATA cells".into()));
        }
        Self::new(g.ncols, g.nrows, g.cellsize, g.cellsize, g.xllcorner, g.yllcorner, g.data)
    }

    /// Wraps a per-cell field in an ESRI grid with this geometry.
    pub fn to_ascii(&self, field: &[f64]) -> Result<AsciiGrid> {
        if (self.dx - self.dy).abs() > 1e-12 * self.dx {
            return Err(Error::Config("ESRI ASCII grids need square cells".into()));
        }
        if field.len() != self.len() {
            return Err(Error::Shape("field does not match grid".into()));
        }
        let mut g = AsciiGrid::new(self.nx, self.ny, self.x0, self.y0, self.dx);
        g.data.copy_from_slice(field);
        Ok(g)
    }
}

/// Water depth and depth-averaged velocity on every cell, plus model time.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicState {
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl HydraulicState {
    pub fn dry(grid: &GridSpec) -> Self {
        let n = grid.len();
        HydraulicState { h: vec![0.0; n], u: vec![0.0; n], v: vec![0.0; n], t: 0.0 }
    }

    /// Still water with a flat free surface at `level`.
    pub fn lake_at_rest(grid: &GridSpec, level: f64) -> Self {
        let h = grid.bottom_elevation.iter().map(|&z| (level - z).max(0.0)).collect();
        HydraulicState { h, u: vec![0.0; grid.len()], v: vec![0.0; grid.len()], t: 0.0 }
    }

    pub fn validate(&self, grid: &GridSpec, params: &PhysicsParams) -> Result<()> {
        let n = grid.len();
        if self.h.len() != n || self.u.len() != n || self.v.len() != n {
            return Err(Error::Shape(format!("state fields do not match the {}x{} grid", grid.nx, grid.ny)));
        }
        for k in 0..n {
            let (h, u, v) = (self.h[k], self.u[k], self.v[k]);
            if !(h.is_finite() && u.is_finite() && v.is_finite()) {
                return Err(Error::Instability { time: self.t, detail: format!("non-finite value in cell {k}") });
            }
            if h < 0.0 {
                return Err(Error::Domain(format!("negative depth {h} in cell {k}")));
            }
            if h < params.h_dry && (u != 0.0 || v != 0.0) {
                return Err(Error::Domain(format!("dry cell {k} carries velocity")));
            }
        }
        Ok(())
    }

    pub fn free_surface(&self, grid: &GridSpec, k: usize) -> f64 {
        grid.bottom_elevation[k] + self.h[k]
    }

    pub fn wet_count(&self, params: &PhysicsParams) -> usize {
        self.h.iter().filter(|&&h| h >= params.h_dry).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    pub g: f64,
    pub nu_e: f64,
    pub h_dry: f64,
    pub cfl: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams { g: 9.81, nu_e: 0.0, h_dry: 1e-3, cfl: 0.45 }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(Error::Config(format!("g must be positive, got {}", self.g)));
        }
        if !(self.nu_e >= 0.0) {
            return Err(Error::Config(format!("nu_e must be non-negative, got {}", self.nu_e)));
        }
        if !(self.h_dry > 0.0 && self.h_dry <= 0.05) {
            return Err(Error::Config(format!("h_dry must lie in (0, 0.05], got {}", self.h_dry)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Strickler coefficient per cell, m^(1/3)/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionField {
    pub ks: Vec<f64>,
}

impl FrictionField {
    pub fn new(ks: Vec<f64>) -> Result<Self> {
        if let Some(bad) = ks.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::Domain(format!("Strickler coefficient must be positive, got {bad}")));
        }
        Ok(FrictionField { ks })
    }

    pub fn uniform(grid: &GridSpec, ks: f64) -> Result<Self> {
        Self::new(vec![ks; grid.len()])
    }
}

/// Total stored water volume, m³.
pub fn total_volume(state: &HydraulicState, grid: &GridSpec) -> f64 {
    state.h.iter().sum::<f64>() * grid.cell_area()
}
